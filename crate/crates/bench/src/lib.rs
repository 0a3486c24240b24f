//! Workloads shared by the benchmarks.

use dyps::{manifest_from_spec, ChunkSpec, StreamManifest};

/// `chunks` chunks of `duration_s` each, cycling qcif -> cif -> 4cif -> cif.
pub fn alternating_manifest(chunks: usize, duration_s: f64) -> StreamManifest {
    const CYCLE: [(&str, f64); 4] = [("qcif", 512.0), ("cif", 4000.0), ("4cif", 4000.0), ("cif", 2000.0)];
    let specs: Vec<ChunkSpec> = (0..chunks)
        .map(|i| {
            let (res, kbps) = CYCLE[i % CYCLE.len()];
            ChunkSpec::new(res, kbps, duration_s)
        })
        .collect();
    manifest_from_spec(&specs, 30.0).expect("non-empty manifest")
}
