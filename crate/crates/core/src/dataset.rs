//! Categorical datasets: schemas with a sensitivity predicate, encoding into
//! the `[w]` alphabet, and a synthetic census-style generator.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UldpError};
use crate::simplex::{Distribution, Partition};

const MAX_REPORTED_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub categories: Vec<String>,
}

/// Boolean condition on a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Eq { column: String, value: String },
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn eq(column: &str, value: &str) -> Self {
        Predicate::Eq {
            column: column.into(),
            value: value.into(),
        }
    }

    fn eval(&self, schema: &Schema, values: &[usize]) -> bool {
        match self {
            Predicate::Eq { column, value } => {
                let c = schema.column_index(column).expect("validated");
                schema.columns[c].categories[values[c]] == *value
            }
            Predicate::All(ps) => ps.iter().all(|p| p.eval(schema, values)),
            Predicate::Any(ps) => ps.iter().any(|p| p.eval(schema, values)),
            Predicate::Not(p) => !p.eval(schema, values),
        }
    }

    fn check(&self, schema: &Schema) -> Result<()> {
        match self {
            Predicate::Eq { column, value } => {
                let c = schema.column_index(column).ok_or_else(|| {
                    UldpError::Dataset(format!("predicate names unknown column '{column}'"))
                })?;
                if !schema.columns[c].categories.contains(value) {
                    return Err(UldpError::Dataset(format!(
                        "predicate value '{value}' is not a category of '{column}'"
                    )));
                }
                Ok(())
            }
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().try_for_each(|p| p.check(schema)),
            Predicate::Not(p) => p.check(schema),
        }
    }
}

/// Categorical columns plus the predicate marking sensitive records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub sensitive: Predicate,
}

impl Schema {
    pub fn new(columns: Vec<Column>, sensitive: Predicate) -> Result<Self> {
        let s = Self { columns, sensitive };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Schema = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(UldpError::Dataset("schema has no columns".into()));
        }
        for c in &self.columns {
            if c.categories.is_empty() {
                return Err(UldpError::Dataset(format!("column '{}' has no categories", c.name)));
            }
        }
        self.sensitive.check(self)
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Number of cells in the full cross product.
    pub fn raw_codes(&self) -> usize {
        self.columns.iter().map(|c| c.categories.len()).product()
    }

    /// Mixed-radix code of a cell, first column most significant.
    fn raw_code(&self, values: &[usize]) -> usize {
        self.columns
            .iter()
            .zip(values)
            .fold(0, |acc, (c, &v)| acc * c.categories.len() + v)
    }

    fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut values = vec![0; self.columns.len()];
        for (i, c) in self.columns.iter().enumerate().rev() {
            values[i] = code % c.categories.len();
            code /= c.categories.len();
        }
        values
    }

    pub fn is_sensitive(&self, values: &[usize]) -> bool {
        self.sensitive.eval(self, values)
    }
}

/// One symbol of the encoded alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolInfo {
    /// 1-based symbol label.
    pub label: usize,
    pub raw_code: usize,
    pub values: Vec<String>,
    pub sensitive: bool,
    pub count: u64,
}

/// Dataset mapped onto `[w]`: observed cells only, sensitive cells first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Encoding {
    pub columns: Vec<String>,
    pub raw_codes: usize,
    pub w: usize,
    pub v: usize,
    pub n: u64,
    pub symbols: Vec<SymbolInfo>,
}

impl Encoding {
    pub fn partition(&self) -> Result<Partition> {
        Partition::new(self.w, self.v)
    }

    /// Empirical distribution of the encoded records.
    pub fn distribution(&self) -> Result<Distribution> {
        let n = self.n as f64;
        Distribution::new(self.symbols.iter().map(|s| s.count as f64 / n).collect())
    }

    pub fn mapping_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads a headed CSV and encodes it. Columns absent from the schema are
/// ignored; values outside the schema are reported with their row numbers.
pub fn encode<R: Read>(input: R, schema: &Schema) -> Result<Encoding> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    let idx: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            headers.iter().position(|h| h == c.name).ok_or_else(|| {
                UldpError::Dataset(format!("CSV has no column '{}'", c.name))
            })
        })
        .collect::<Result<_>>()?;
    let lookup: Vec<HashMap<&str, usize>> = schema
        .columns
        .iter()
        .map(|c| c.categories.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
        .collect();
    let mut counts = vec![0u64; schema.raw_codes()];
    let mut problems = Vec::new();
    let mut bad_rows = 0usize;
    let mut values = vec![0usize; schema.columns.len()];
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut ok = true;
        for (c, &j) in idx.iter().enumerate() {
            let cell = rec.get(j).unwrap_or("");
            match lookup[c].get(cell) {
                Some(&v) => values[c] = v,
                None => {
                    ok = false;
                    if problems.len() < MAX_REPORTED_ROWS {
                        problems.push(format!(
                            "row {}: column '{}' has value '{cell}'",
                            row + 1,
                            schema.columns[c].name
                        ));
                    }
                }
            }
        }
        if ok {
            counts[schema.raw_code(&values)] += 1;
        } else {
            bad_rows += 1;
        }
    }
    if bad_rows > 0 {
        return Err(UldpError::Dataset(format!(
            "{bad_rows} rows have values outside the schema: {}",
            problems.join("; ")
        )));
    }
    let mut sens = Vec::new();
    let mut nonsens = Vec::new();
    for (code, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let vals = schema.decode(code);
        if schema.is_sensitive(&vals) {
            sens.push((code, vals, count));
        } else {
            nonsens.push((code, vals, count));
        }
    }
    let v = sens.len();
    let symbols: Vec<SymbolInfo> = sens
        .into_iter()
        .map(|s| (s, true))
        .chain(nonsens.into_iter().map(|s| (s, false)))
        .enumerate()
        .map(|(i, ((code, vals, count), sensitive))| SymbolInfo {
            label: i + 1,
            raw_code: code,
            values: vals
                .iter()
                .zip(&schema.columns)
                .map(|(&v, c)| c.categories[v].clone())
                .collect(),
            sensitive,
            count,
        })
        .collect();
    let enc = Encoding {
        columns: schema.columns.iter().map(|c| c.name.clone()).collect(),
        raw_codes: schema.raw_codes(),
        w: symbols.len(),
        v,
        n: counts.iter().sum(),
        symbols,
    };
    enc.partition()?;
    Ok(enc)
}

/// Which census-style sensitivity rule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Disadvantaged, outside the labour force, and below poverty.
    Stringent,
    /// Everything except a small set of clearly advantaged cells.
    Permissive,
}

fn census_columns() -> Vec<Column> {
    let col = |name: &str, cats: &[&str]| Column {
        name: name.into(),
        categories: cats.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        col("age", &["18-29", "30-44", "45-64", "65+"]),
        col("education", &["no_hs_diploma", "hs_or_higher"]),
        col("marital", &["widowed_divorced", "other"]),
        col("disability", &["none", "one", "multiple"]),
        col("employment", &["in_labor_force", "not_in_labor_force"]),
        col("income", &["below_poverty", "poverty_to_2x", "above_2x"]),
    ]
}

fn advantaged() -> Predicate {
    use Predicate as P;
    let base = |income: &str| {
        vec![
            P::eq("income", income),
            P::eq("disability", "none"),
        ]
    };
    let with = |mut v: Vec<P>, extra: Vec<P>| {
        v.extend(extra);
        P::All(v)
    };
    P::Any(vec![
        with(base("above_2x"), vec![P::eq("employment", "in_labor_force")]),
        with(
            base("above_2x"),
            vec![
                P::eq("employment", "not_in_labor_force"),
                P::eq("education", "hs_or_higher"),
                P::eq("marital", "other"),
            ],
        ),
        with(
            base("poverty_to_2x"),
            vec![
                P::eq("employment", "in_labor_force"),
                P::eq("education", "hs_or_higher"),
                P::eq("marital", "other"),
            ],
        ),
        with(
            base("poverty_to_2x"),
            vec![
                P::eq("employment", "in_labor_force"),
                P::eq("education", "hs_or_higher"),
                P::eq("marital", "widowed_divorced"),
                P::Any(vec![P::eq("age", "30-44"), P::eq("age", "45-64")]),
            ],
        ),
    ])
}

/// Six-column census-style schema with 288 cells.
pub fn census_schema(criterion: Criterion) -> Schema {
    use Predicate as P;
    let sensitive = match criterion {
        Criterion::Stringent => P::All(vec![
            P::Any(vec![
                P::eq("education", "no_hs_diploma"),
                P::eq("marital", "widowed_divorced"),
                P::eq("disability", "one"),
                P::eq("disability", "multiple"),
            ]),
            P::eq("employment", "not_in_labor_force"),
            P::eq("income", "below_poverty"),
        ]),
        Criterion::Permissive => P::Not(Box::new(advantaged())),
    };
    Schema::new(census_columns(), sensitive).expect("built-in schema is valid")
}

/// Cells that never occur in the synthetic data: every fifth stringent
/// sensitive cell and two advantaged cells.
fn empty_cells(schema: &Schema) -> Vec<bool> {
    let stringent = census_schema(Criterion::Stringent);
    let permissive = census_schema(Criterion::Permissive);
    let mut empty = vec![false; schema.raw_codes()];
    let (mut s, mut a) = (0usize, 0usize);
    for (code, e) in empty.iter_mut().enumerate() {
        let vals = schema.decode(code);
        if stringent.is_sensitive(&vals) {
            *e = s % 5 == 0;
            s += 1;
        } else if !permissive.is_sensitive(&vals) {
            *e = a == 3 || a == 17;
            a += 1;
        }
    }
    empty
}

/// Synthetic records over [`census_schema`]. Every non-empty cell appears at
/// least once; the rest are drawn from fixed marginals and shuffled.
pub fn synthetic_census(rows: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let schema = census_schema(Criterion::Stringent);
    let empty = empty_cells(&schema);
    let present: Vec<usize> = (0..schema.raw_codes()).filter(|&c| !empty[c]).collect();
    if rows < present.len() {
        return Err(UldpError::Dataset(format!(
            "need at least {} rows to cover every cell",
            present.len()
        )));
    }
    let marginals: [&[f64]; 6] = [
        &[0.2, 0.25, 0.33, 0.22],
        &[0.12, 0.88],
        &[0.2, 0.8],
        &[0.85, 0.1, 0.05],
        &[0.62, 0.38],
        &[0.12, 0.18, 0.7],
    ];
    let weights: Vec<f64> = (0..schema.raw_codes())
        .map(|code| {
            if empty[code] {
                return 0.0;
            }
            schema
                .decode(code)
                .iter()
                .zip(marginals)
                .map(|(&v, m)| m[v])
                .product()
        })
        .collect();
    let draw = WeightedIndex::new(&weights).map_err(|e| UldpError::Dataset(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codes = present;
    while codes.len() < rows {
        codes.push(draw.sample(&mut rng));
    }
    codes.shuffle(&mut rng);
    Ok(codes
        .into_iter()
        .map(|code| {
            schema
                .decode(code)
                .iter()
                .zip(&schema.columns)
                .map(|(&v, c)| c.categories[v].clone())
                .collect()
        })
        .collect())
}

/// Writes [`synthetic_census`] records as a headed CSV.
pub fn write_synthetic_csv<W: Write>(out: W, rows: usize, seed: u64) -> Result<()> {
    let schema = census_schema(Criterion::Stringent);
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(schema.columns.iter().map(|c| c.name.as_str()))?;
    for rec in synthetic_census(rows, seed)? {
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encoded(criterion: Criterion) -> Encoding {
        let mut buf = Vec::new();
        write_synthetic_csv(&mut buf, 5_000, 3).unwrap();
        encode(buf.as_slice(), &census_schema(criterion)).unwrap()
    }

    #[test]
    fn schema_sizes() {
        let s = census_schema(Criterion::Stringent);
        assert_eq!(s.raw_codes(), 288);
        let n = (0..288).filter(|&c| s.is_sensitive(&s.decode(c))).count();
        assert_eq!(n, 44);
        let p = census_schema(Criterion::Permissive);
        let n = (0..288).filter(|&c| !p.is_sensitive(&p.decode(c))).count();
        assert_eq!(n, 26);
    }

    #[test]
    fn synthetic_dimensions() {
        let st = encoded(Criterion::Stringent);
        assert_eq!((st.w, st.v, st.raw_codes), (277, 35, 288));
        let pe = encoded(Criterion::Permissive);
        assert_eq!((pe.w, pe.v), (277, 253));
        assert!(st.symbols[..35].iter().all(|s| s.sensitive));
        assert!(st.symbols[35..].iter().all(|s| !s.sensitive));
        assert_eq!(st.n, 5_000);
    }

    #[test]
    fn reports_bad_rows() {
        let csv = "age,education,marital,disability,employment,income\n\
                   18-29,hs_or_higher,other,none,in_labor_force,above_2x\n\
                   17,hs_or_higher,other,none,in_labor_force,above_2x\n";
        let err = encode(csv.as_bytes(), &census_schema(Criterion::Stringent)).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn schema_json_roundtrip() {
        let s = census_schema(Criterion::Permissive);
        assert_eq!(Schema::from_json(&s.to_json().unwrap()).unwrap(), s);
        let bad = r#"{"columns":[{"name":"a","categories":["x"]}],"sensitive":{"eq":{"column":"b","value":"x"}}}"#;
        assert!(Schema::from_json(bad).is_err());
    }

    #[test]
    fn deterministic_generator() {
        assert_eq!(synthetic_census(400, 9).unwrap(), synthetic_census(400, 9).unwrap());
    }
}
