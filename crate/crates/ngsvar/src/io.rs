//! Artifact persistence: posterior draws as little-endian binary blocks
//! with a JSON manifest, and CSV/JSON report writers that stamp every file
//! with the configuration hash so reruns are verifiable byte for byte.

use crate::error::{Error, Result};
use crate::gibbs::{PosteriorSample, ProxyState};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Hex SHA-256 of the canonical configuration text. Stamped into every
/// output artifact so a rerun can be checked against its config.
pub fn config_hash(canonical: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Names and dimensions of the persisted blocks; loading validates byte
/// counts against this before touching any numbers.
#[derive(Debug, Serialize, serde::Deserialize)]
struct PosteriorMeta {
    n: usize,
    p: usize,
    r: usize,
    t: usize,
    draws: usize,
    has_proxy: bool,
}

fn block_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.bin"))
}

fn write_block(dir: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(block_path(dir, name))?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_block(dir: &Path, name: &str, expected: usize) -> Result<Vec<f64>> {
    let path = block_path(dir, name);
    let file = File::open(&path)
        .map_err(|_| Error::MissingArtifact(format!("posterior block {}", path.display())))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes)?;
    if bytes.len() != expected * 8 {
        return Err(Error::Dimension(format!(
            "block {name} holds {} bytes, expected {}",
            bytes.len(),
            expected * 8
        )));
    }
    let mut values = Vec::with_capacity(expected);
    for chunk in bytes.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(values)
}

fn flatten_matrices(items: &[DMatrix<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for m in items {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push(m[(i, j)]);
            }
        }
    }
    out
}

fn unflatten_matrices(flat: &[f64], draws: usize, rows: usize, cols: usize) -> Vec<DMatrix<f64>> {
    let per = rows * cols;
    (0..draws)
        .map(|d| DMatrix::from_fn(rows, cols, |i, j| flat[d * per + i * cols + j]))
        .collect()
}

/// Persist all retained draws under `dir`: a `meta.json` manifest plus one
/// raw little-endian f64 block per parameter group.
pub fn save_posterior(dir: &Path, posterior: &PosteriorSample) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let draws = posterior.n_draws();
    let meta = PosteriorMeta {
        n: posterior.n,
        p: posterior.p,
        r: posterior.r,
        t: posterior.t,
        draws,
        has_proxy: !posterior.proxy.is_empty(),
    };
    let mut meta_file = BufWriter::new(File::create(dir.join("meta.json"))?);
    serde_json::to_writer_pretty(&mut meta_file, &meta)?;
    meta_file.write_all(b"\n")?;
    meta_file.flush()?;

    write_block(dir, "beta", &flatten_matrices(&posterior.coef))?;
    write_block(dir, "loadings", &flatten_matrices(&posterior.loadings))?;
    let sigma2: Vec<f64> = posterior.sigma2.iter().flat_map(|v| v.iter().copied()).collect();
    write_block(dir, "sigma2", &sigma2)?;
    let dof: Vec<f64> = posterior.dof.iter().flat_map(|v| v.iter().copied()).collect();
    write_block(dir, "dof", &dof)?;
    write_block(dir, "factors", &flatten_matrices(&posterior.factors))?;
    write_block(dir, "weights", &flatten_matrices(&posterior.weights))?;
    let lambda: Vec<f64> = posterior.lambda.iter().flat_map(|l| l.iter().copied()).collect();
    write_block(dir, "lambda", &lambda)?;
    if meta.has_proxy {
        let proxy: Vec<f64> =
            posterior.proxy.iter().flat_map(|s| [s.slope, s.noise_variance]).collect();
        write_block(dir, "proxy", &proxy)?;
    }
    Ok(())
}

/// Load a posterior saved by [`save_posterior`]; the reload is bit-exact.
pub fn load_posterior(dir: &Path) -> Result<PosteriorSample> {
    let meta_path = dir.join("meta.json");
    let meta_file = File::open(&meta_path)
        .map_err(|_| Error::MissingArtifact(format!("posterior manifest {}", meta_path.display())))?;
    let meta: PosteriorMeta = serde_json::from_reader(BufReader::new(meta_file))?;
    let (n, p, r, t, draws) = (meta.n, meta.p, meta.r, meta.t, meta.draws);
    let width = 1 + n * p;

    let coef = unflatten_matrices(&read_block(dir, "beta", draws * n * width)?, draws, n, width);
    let loadings =
        unflatten_matrices(&read_block(dir, "loadings", draws * n * r)?, draws, n, r);
    let sigma2_flat = read_block(dir, "sigma2", draws * n)?;
    let sigma2 = (0..draws)
        .map(|d| DVector::from_fn(n, |i, _| sigma2_flat[d * n + i]))
        .collect();
    let dof_flat = read_block(dir, "dof", draws * r)?;
    let dof = (0..draws).map(|d| DVector::from_fn(r, |a, _| dof_flat[d * r + a])).collect();
    let factors = unflatten_matrices(&read_block(dir, "factors", draws * t * r)?, draws, t, r);
    let weights = unflatten_matrices(&read_block(dir, "weights", draws * t * r)?, draws, t, r);
    let lambda_flat = read_block(dir, "lambda", draws * 2)?;
    let lambda = (0..draws).map(|d| [lambda_flat[2 * d], lambda_flat[2 * d + 1]]).collect();
    let proxy = if meta.has_proxy {
        let flat = read_block(dir, "proxy", draws * 2)?;
        (0..draws)
            .map(|d| ProxyState { slope: flat[2 * d], noise_variance: flat[2 * d + 1] })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PosteriorSample {
        n,
        p,
        r,
        t,
        coef,
        loadings,
        sigma2,
        dof,
        factors,
        weights,
        lambda,
        proxy,
    })
}

/// Format a float the same way on every run: shortest round-trip form.
fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

fn quote_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write a numeric table as CSV, preceded by a `# config-hash:` comment
/// line. Identical inputs produce byte-identical files.
pub fn write_csv_table(
    path: &Path,
    hash: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "csv row {i} has {} fields, expected {}",
                row.len(),
                columns.len()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config-hash: {hash}")?;
    let header: Vec<String> = columns.iter().map(|c| quote_field(c)).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|&v| fmt_value(v)).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Like [`write_csv_table`], with a leading label column.
pub fn write_labelled_csv(
    path: &Path,
    hash: &str,
    label_column: &str,
    columns: &[&str],
    rows: &[(String, Vec<f64>)],
) -> Result<()> {
    for (i, (_, row)) in rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "csv row {i} has {} fields, expected {}",
                row.len(),
                columns.len()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config-hash: {hash}")?;
    let mut header = vec![quote_field(label_column)];
    header.extend(columns.iter().map(|c| quote_field(c)));
    writeln!(w, "{}", header.join(","))?;
    for (label, row) in rows {
        let mut fields = vec![quote_field(label)];
        fields.extend(row.iter().map(|&v| fmt_value(v)));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    payload: &'a T,
}

/// Serialize a report as pretty JSON under a `payload` key, with the
/// config hash alongside it.
pub fn write_json_report<T: Serialize>(path: &Path, hash: &str, payload: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Stamped { config_hash: hash, payload })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    fn synthetic_posterior(draws: usize, has_proxy: bool) -> PosteriorSample {
        let (n, p, r, t) = (3, 2, 2, 5);
        let width = 1 + n * p;
        let mut rng = RngStream::new(77, 0);
        let mut gen_mat =
            |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() - 0.5);
        let coef = (0..draws).map(|_| gen_mat(n, width)).collect();
        let loadings = (0..draws).map(|_| gen_mat(n, r)).collect();
        let factors = (0..draws).map(|_| gen_mat(t, r)).collect();
        let weights = (0..draws).map(|_| gen_mat(t, r).map(|v| v.abs() + 0.1)).collect();
        let mut rng2 = RngStream::new(78, 0);
        let sigma2 =
            (0..draws).map(|_| DVector::from_fn(n, |_, _| rng2.gen::<f64>() + 0.2)).collect();
        let dof =
            (0..draws).map(|_| DVector::from_fn(r, |_, _| 2.0 + 20.0 * rng2.gen::<f64>())).collect();
        let lambda = (0..draws).map(|_| [rng2.gen(), rng2.gen()]).collect();
        let proxy = if has_proxy {
            (0..draws)
                .map(|_| ProxyState { slope: rng2.gen(), noise_variance: rng2.gen::<f64>() + 0.1 })
                .collect()
        } else {
            Vec::new()
        };
        PosteriorSample {
            n,
            p,
            r,
            t,
            coef,
            loadings,
            sigma2,
            dof,
            factors,
            weights,
            lambda,
            proxy,
        }
    }

    #[test]
    fn hash_matches_known_vector() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_ne!(config_hash(b"abc"), config_hash(b"abd"));
    }

    #[test]
    fn posterior_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for has_proxy in [false, true] {
            let posterior = synthetic_posterior(4, has_proxy);
            let sub = dir.path().join(if has_proxy { "with" } else { "without" });
            save_posterior(&sub, &posterior).unwrap();
            let loaded = load_posterior(&sub).unwrap();
            assert_eq!(loaded.n_draws(), 4);
            assert_eq!((loaded.n, loaded.p, loaded.r, loaded.t), (3, 2, 2, 5));
            assert_eq!(loaded.coef, posterior.coef);
            assert_eq!(loaded.loadings, posterior.loadings);
            assert_eq!(loaded.sigma2, posterior.sigma2);
            assert_eq!(loaded.dof, posterior.dof);
            assert_eq!(loaded.factors, posterior.factors);
            assert_eq!(loaded.weights, posterior.weights);
            assert_eq!(loaded.lambda, posterior.lambda);
            assert_eq!(loaded.proxy.len(), posterior.proxy.len());
            for (a, b) in loaded.proxy.iter().zip(&posterior.proxy) {
                assert_eq!(a.slope, b.slope);
                assert_eq!(a.noise_variance, b.noise_variance);
            }
        }
    }

    #[test]
    fn missing_artifacts_report_as_such() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_posterior(&dir.path().join("absent")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
        assert_eq!(err.exit_code(), 3);

        // A manifest without its blocks is also a missing artifact.
        let partial = dir.path().join("partial");
        std::fs::create_dir_all(&partial).unwrap();
        std::fs::write(
            partial.join("meta.json"),
            r#"{"n":2,"p":0,"r":1,"t":3,"draws":2,"has_proxy":false}"#,
        )
        .unwrap();
        let err = load_posterior(&partial).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }

    #[test]
    fn truncated_block_is_a_dimension_error() {
        let dir = tempfile::tempdir().unwrap();
        let posterior = synthetic_posterior(3, false);
        save_posterior(dir.path(), &posterior).unwrap();
        let beta = dir.path().join("beta.bin");
        let bytes = std::fs::read(&beta).unwrap();
        std::fs::write(&beta, &bytes[..bytes.len() - 8]).unwrap();
        let err = load_posterior(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn csv_writers_are_deterministic_and_stamped() {
        let dir = tempfile::tempdir().unwrap();
        let hash = config_hash(b"run config");
        let rows = vec![vec![1.0, 0.5], vec![-2.25, f64::NAN]];
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_csv_table(&a, &hash, &["alpha", "beta"], &rows).unwrap();
        write_csv_table(&b, &hash, &["alpha", "beta"], &rows).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        assert!(text.starts_with(&format!("# config-hash: {hash}\n")));
        assert!(text.contains("alpha,beta"));
        assert!(text.contains("-2.25,NaN"));

        let bad = write_csv_table(&dir.path().join("c.csv"), &hash, &["one"], &rows);
        assert!(matches!(bad.unwrap_err(), Error::Dimension(_)));
    }

    #[test]
    fn labelled_csv_quotes_awkward_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            ("plain".to_string(), vec![1.0]),
            ("with, comma".to_string(), vec![2.0]),
            ("with \"quote\"".to_string(), vec![3.0]),
        ];
        write_labelled_csv(&path, "h", "name", &["v"], &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"with, comma\",2"));
        assert!(text.contains("\"with \"\"quote\"\"\",3"));
    }

    #[test]
    fn json_report_carries_hash_and_payload() {
        #[derive(Serialize)]
        struct Demo {
            value: f64,
            name: String,
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let hash = config_hash(b"cfg");
        write_json_report(&path, &hash, &Demo { value: 2.5, name: "x".into() }).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed["config_hash"], serde_json::Value::String(hash));
        assert_eq!(parsed["payload"]["value"], serde_json::json!(2.5));
        assert_eq!(parsed["payload"]["name"], serde_json::json!("x"));
    }
}
