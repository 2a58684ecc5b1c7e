use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::reward::ObjectiveVector;
use crate::space::HyperparamVector;

/// One evaluated genome. Rank and crowding are those of the pool the genome
/// was first ranked in.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub generation: usize,
    pub vector: HyperparamVector,
    pub objectives: ObjectiveVector,
    pub failed: bool,
    pub rank: usize,
    pub crowding: f64,
}

/// Row of a history file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub generation: usize,
    pub genome_hash: String,
    /// Parameter columns as written.
    pub params: Vec<(String, String)>,
    pub objectives: ObjectiveVector,
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTable {
    pub objective_names: Vec<String>,
    pub rows: Vec<HistoryRow>,
    /// Rows dropped because they did not parse.
    pub skipped: usize,
}

const OBJ_PREFIX: &str = "obj_";

/// Columns: `generation, genome_hash, <params...>, obj_<name>..., rank, crowding`.
/// Parameters are written with the values that were evaluated (inactive
/// ones canonicalised).
pub fn write_history_csv<W: Write>(out: W, objective_names: &[String], records: &[HistoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let params: Vec<String> = records
        .first()
        .map(|r| r.vector.iter().map(|(n, _, _)| n.to_string()).collect())
        .unwrap_or_default();
    let mut header = vec!["generation".to_string(), "genome_hash".to_string()];
    header.extend(params.iter().cloned());
    header.extend(objective_names.iter().map(|n| format!("{OBJ_PREFIX}{n}")));
    header.extend(["rank".to_string(), "crowding".to_string()]);
    let csv_err = |e: csv::Error| Error::invalid(format!("writing history: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.generation.to_string(), r.vector.hash().to_string()];
        row.extend(params.iter().map(|p| r.vector.canonical(p).map(|v| v.to_string()).unwrap_or_default()));
        row.extend(r.objectives.values().iter().map(|v| v.to_string()));
        row.push(r.rank.to_string());
        row.push(r.crowding.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing history", e))?;
    Ok(())
}

/// Reads a history file. Rows that fail to parse are skipped, counted and
/// logged; a missing or unusable header is an error.
pub fn parse_history_csv<R: Read>(input: R, origin: &str) -> Result<HistoryTable> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(gen_col), Some(hash_col)) = (col("generation"), col("genome_hash")) else {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: "header needs `generation` and `genome_hash` columns".into(),
        });
    };
    let obj_cols: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(OBJ_PREFIX).map(|n| (i, n.to_string())))
        .collect();
    if obj_cols.is_empty() {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: format!("no `{OBJ_PREFIX}*` objective columns"),
        });
    }
    let rank_col = col("rank");
    let crowding_col = col("crowding");
    let param_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != gen_col && i != hash_col && Some(i) != rank_col && Some(i) != crowding_col)
        .filter(|i| !obj_cols.iter().any(|(c, _)| c == i))
        .collect();

    let mut rows = Vec::new();
    let mut skipped = 0;
    for (k, record) in rd.records().enumerate() {
        let line = k + 2;
        let parsed = record.map_err(|e| e.to_string()).and_then(|rec| {
            if rec.len() != header.len() {
                return Err(format!("{} fields, header has {}", rec.len(), header.len()));
            }
            let generation = rec[gen_col].parse::<usize>().map_err(|e| format!("generation: {e}"))?;
            let objectives = obj_cols
                .iter()
                .map(|(i, n)| rec[*i].parse::<f64>().map(|v| (n.clone(), v)).map_err(|e| format!("{OBJ_PREFIX}{n}: {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let objectives = ObjectiveVector::new(objectives).map_err(|e| e.to_string())?;
            Ok(HistoryRow {
                generation,
                genome_hash: rec[hash_col].to_string(),
                params: param_cols.iter().map(|&i| (header[i].to_string(), rec[i].to_string())).collect(),
                objectives,
                rank: rank_col.and_then(|i| rec[i].parse().ok()),
                crowding: crowding_col.and_then(|i| rec[i].parse().ok()),
            })
        });
        match parsed {
            Ok(row) => rows.push(row),
            Err(msg) => {
                log::warn!("{origin}:{line}: skipping row: {msg}");
                skipped += 1;
            }
        }
    }
    Ok(HistoryTable {
        objective_names: obj_cols.into_iter().map(|(_, n)| n).collect(),
        rows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{repair, ParamDescriptor, SearchSpace};

    fn record(x: f64, g: usize) -> HistoryRecord {
        let space = SearchSpace::new(vec![ParamDescriptor::float("x", -5.0, 5.0), ParamDescriptor::int("n", 0, 3)]).unwrap();
        HistoryRecord {
            generation: g,
            vector: repair(&space, &[x, 1.0]).unwrap(),
            objectives: ObjectiveVector::new([("a", x), ("b", -x)]).unwrap(),
            failed: false,
            rank: 0,
            crowding: f64::INFINITY,
        }
    }

    #[test]
    fn round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let recs = vec![record(0.5, 0), record(-1.25, 1)];
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &names, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("generation,genome_hash,x,n,obj_a,obj_b,rank,crowding\n"));
        let table = parse_history_csv(text.as_bytes(), "h.csv").unwrap();
        assert_eq!(table.skipped, 0);
        assert_eq!(table.objective_names, names);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[1].objectives.values(), vec![-1.25, 1.25]);
        assert_eq!(table.rows[1].genome_hash, recs[1].vector.hash().to_string());
        assert_eq!(table.rows[0].crowding, Some(f64::INFINITY));
        assert_eq!(table.rows[0].params, vec![("x".into(), "0.5".into()), ("n".into(), "1".into())]);
    }

    #[test]
    fn malformed_rows_are_skipped() {
        let text = "generation,genome_hash,obj_a\n0,aa,1.0\nx,bb,2\n1,cc\n2,dd,nan\n3,ee,3\n";
        let table = parse_history_csv(text.as_bytes(), "h.csv").unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.skipped, 3);
    }

    #[test]
    fn unusable_headers_fail() {
        assert!(parse_history_csv("generation,genome_hash\n".as_bytes(), "h").is_err());
        assert!(parse_history_csv("a,b,obj_c\n".as_bytes(), "h").is_err());
        assert!(parse_history_csv("".as_bytes(), "h").is_err());
    }
}
