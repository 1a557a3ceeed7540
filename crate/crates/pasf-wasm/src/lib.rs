//! Browser bindings: run the benchmark simulators and the decomposition
//! in-memory and serve the results to JavaScript as JSON strings.
//!
//! The session API in [`session`] is plain Rust (testable on any target);
//! the `wasm32` build additionally exports thin `wasm-bindgen` wrappers.
//! Build for the web with:
//!
//! ```text
//! wasm-pack build crates/pasf-wasm --target web --out-dir ../../www/pkg
//! ```

pub mod session {
    use std::cell::RefCell;

    use pasf::baseline::pca_decompose;
    use pasf::io::RunConfig;
    use pasf::pipeline::{decompose_field, PipelineOutput};
    use pasf::simkit::{
        simulate_propagation, simulate_rotating, PropagationSpec, RotatingSourceSpec,
        PROPAGATION_DEMO_SEED, ROTATING_DEMO_SEED,
    };
    use pasf::spectral::{demean, Field};
    use serde::Deserialize;

    /// Everything the page needs to repaint without re-running the pipeline.
    struct Session {
        centered: Field,
        components: Vec<Field>,
        residual: Field,
        /// Shared colormap scale: max |value| over all displayed fields.
        scale: f64,
        pca_components: Option<Vec<Field>>,
    }

    thread_local! {
        static SESSION: RefCell<Option<Session>> = const { RefCell::new(None) };
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct ScenarioParams {
        scenario: String,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_noise")]
        noise_variance: f64,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_q")]
        q: usize,
        #[serde(default)]
        k: Option<usize>,
    }

    fn default_n() -> usize {
        600
    }
    fn default_noise() -> f64 {
        0.16
    }
    fn default_q() -> usize {
        10
    }

    fn max_abs(field: &Field) -> f64 {
        field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Simulate a benchmark scenario, decompose it, store the results for
    /// [`frames_at`]/[`run_baseline`], and return a JSON run summary.
    pub fn run_scenario(params_json: &str) -> Result<String, String> {
        let p: ScenarioParams =
            serde_json::from_str(params_json).map_err(|e| format!("params: {e}"))?;
        let sim = match p.scenario.as_str() {
            "rotating" => simulate_rotating(
                &RotatingSourceSpec::scenario_defaults(),
                p.n,
                p.noise_variance,
                p.seed.unwrap_or(ROTATING_DEMO_SEED),
                Some(1.6),
            ),
            "propagation" => simulate_propagation(
                &PropagationSpec::scenario_defaults(),
                p.n,
                p.seed.unwrap_or(PROPAGATION_DEMO_SEED),
            ),
            other => return Err(format!("scenario must be `rotating` or `propagation`, got `{other}`")),
        }
        .map_err(|e| e.to_string())?;

        let config = RunConfig { q: p.q, k: p.k, ..RunConfig::default() };
        let out = match decompose_field(&sim.observed, &config).map_err(|e| e.to_string())? {
            PipelineOutput::Full(out) => *out,
            PipelineOutput::EmptyAtlas { message, .. } => return Err(message),
        };

        let centered = demean(&sim.observed);
        let mut scale = max_abs(&centered);
        for c in &out.decomposition.components {
            scale = scale.max(max_abs(c));
        }
        scale = scale.max(max_abs(&out.decomposition.residual));

        let r = &out.report;
        let tail_from = out.merges.len().saturating_sub(12);
        let merge_tail: Vec<f64> = out.merges[tail_from..].iter().map(|m| m.height).collect();
        let pcs: Vec<Vec<f64>> = out
            .decomposition
            .pcs
            .iter()
            .map(|p| p.series.first().cloned().unwrap_or_default())
            .collect();
        let summary = serde_json::json!({
            "grid_h": sim.observed.grid_h,
            "grid_w": sim.observed.grid_w,
            "n": sim.observed.n,
            "k": r.k,
            "k_auto": r.k_auto,
            "selected": r.selected,
            "delta": r.delta,
            "threshold_mode": r.threshold_mode,
            "shares": r.shares,
            "residual_share": r.residual_share,
            "coherence_max": r.coherence_max,
            "timings_ms": r.timings_ms,
            "warnings": r.warnings,
            "merge_tail": merge_tail,
            "pcs": pcs,
            "scale": scale,
        });

        SESSION.with(|s| {
            *s.borrow_mut() = Some(Session {
                centered,
                components: out.decomposition.components,
                residual: out.decomposition.residual,
                scale,
                pca_components: None,
            });
        });
        serde_json::to_string(&summary).map_err(|e| e.to_string())
    }

    /// One time slice of every stored field, for canvas repaints.
    pub fn frames_at(t: usize) -> Result<String, String> {
        SESSION.with(|s| {
            let borrow = s.borrow();
            let sess = borrow.as_ref().ok_or("no run yet: call run_scenario first")?;
            if t >= sess.centered.n {
                return Err(format!("t={t} out of range (n={})", sess.centered.n));
            }
            let doc = serde_json::json!({
                "t": t,
                "scale": sess.scale,
                "observed": sess.centered.frame(t),
                "components": sess.components.iter().map(|c| c.frame(t)).collect::<Vec<_>>(),
                "residual": sess.residual.frame(t),
                "pca": sess.pca_components.as_ref().map(|v| v.iter().map(|c| c.frame(t)).collect::<Vec<_>>()),
            });
            serde_json::to_string(&doc).map_err(|e| e.to_string())
        })
    }

    /// PCA on the stored field with `k` components; caches the component
    /// fields so [`frames_at`] includes them from then on.
    pub fn run_baseline(k: usize) -> Result<String, String> {
        SESSION.with(|s| {
            let mut borrow = s.borrow_mut();
            let sess = borrow.as_mut().ok_or("no run yet: call run_scenario first")?;
            let (model, components) =
                pca_decompose(&sess.centered, k).map_err(|e| e.to_string())?;
            let residual_share = (1.0 - model.shares.iter().sum::<f64>()).max(0.0);
            let doc = serde_json::json!({
                "k": k,
                "shares": model.shares,
                "residual_share": residual_share,
            });
            sess.pca_components = Some(components);
            serde_json::to_string(&doc).map_err(|e| e.to_string())
        })
    }
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn run_scenario(params_json: &str) -> Result<String, JsValue> {
        crate::session::run_scenario(params_json).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen]
    pub fn frames_at(t: usize) -> Result<String, JsValue> {
        crate::session::frames_at(t).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen]
    pub fn run_baseline(k: usize) -> Result<String, JsValue> {
        crate::session::run_baseline(k).map_err(|e| JsValue::from_str(&e))
    }
}
