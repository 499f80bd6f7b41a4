//! Text embedding client with an offline deterministic mock.
//!
//! Wire protocol: `POST <url>` with `{"input": [texts], "model": "<name>"}`,
//! answered by `{"embeddings": [[f32, ..], ..]}` in input order. A bearer
//! token is read from `GEOVLM_EMBED_TOKEN`. URLs starting with `mock:` never
//! touch the network.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LangError;
use crate::geostore::Embedding;

pub const TOKEN_ENV: &str = "GEOVLM_EMBED_TOKEN";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedEndpoint {
    pub url: String,
    pub model: String,
    pub text_dim: usize,
    pub token: Option<String>,
    /// Retries after the first attempt for transport errors, 429 and 5xx.
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    /// Texts per request.
    pub batch_size: usize,
}

impl Default for EmbedEndpoint {
    fn default() -> Self {
        Self {
            url: "mock:".into(),
            model: "text-embedding-3-small".into(),
            text_dim: 1536,
            token: None,
            max_retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(30),
            batch_size: 64,
        }
    }
}

impl EmbedEndpoint {
    /// Endpoint at `url` with the token taken from the environment.
    pub fn from_env(url: &str, model: &str, text_dim: usize) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            text_dim,
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            ..Self::default()
        }
    }

    pub fn is_mock(&self) -> bool {
        self.url.starts_with("mock:")
    }
}

/// Unit-norm vector seeded from the SHA-256 of `text`. Identical texts map
/// to identical vectors on every platform.
pub fn mock_embedding(text: &str, dim: usize) -> Embedding {
    let seed: [u8; 32] = Sha256::digest(text.as_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    Embedding::new(raw.iter().map(|v| (v / norm) as f32).collect()).expect("finite")
}

#[derive(Serialize)]
struct Request<'a> {
    input: &'a [String],
    model: &'a str,
}

#[derive(Deserialize)]
struct Response {
    embeddings: Vec<Vec<f32>>,
}

/// Embeds `texts`, one vector per text, in input order.
pub fn embed_texts(texts: &[String], endpoint: &EmbedEndpoint) -> Result<Vec<Embedding>, LangError> {
    if endpoint.is_mock() {
        return Ok(texts
            .iter()
            .map(|t| mock_embedding(t, endpoint.text_dim))
            .collect());
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(endpoint.timeout))
        .build()
        .into();
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(endpoint.batch_size.max(1)) {
        let vectors = post_with_retry(&agent, batch, endpoint)?;
        if vectors.len() != batch.len() {
            return Err(LangError::ResponseCount {
                expected: batch.len(),
                found: vectors.len(),
            });
        }
        for v in vectors {
            if v.len() != endpoint.text_dim {
                return Err(LangError::DimMismatch {
                    expected: endpoint.text_dim,
                    found: v.len(),
                });
            }
            out.push(Embedding::new(v).map_err(|e| LangError::BadResponse(e.to_string()))?);
        }
    }
    Ok(out)
}

fn post_with_retry(
    agent: &ureq::Agent,
    batch: &[String],
    endpoint: &EmbedEndpoint,
) -> Result<Vec<Vec<f32>>, LangError> {
    let body = Request {
        input: batch,
        model: &endpoint.model,
    };
    let attempts = endpoint.max_retries + 1;
    let mut last_failure = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(endpoint.backoff * 2u32.saturating_pow(attempt - 1));
        }
        let mut request = agent.post(&endpoint.url);
        if let Some(token) = &endpoint.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = match request.send_json(&body) {
            Ok(r) => r,
            Err(e) => {
                last_failure = e.to_string();
                continue;
            }
        };
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LangError::BadResponse(e.to_string()));
        if status == 429 || status >= 500 {
            last_failure = format!("status {status}: {}", text.unwrap_or_default());
            continue;
        }
        let text = text?;
        if !(200..300).contains(&status) {
            return Err(LangError::Status { status, body: text });
        }
        let parsed: Response =
            serde_json::from_str(&text).map_err(|e| LangError::BadResponse(e.to_string()))?;
        return Ok(parsed.embeddings);
    }
    Err(LangError::Unreachable {
        url: endpoint.url.clone(),
        attempts,
        message: last_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retriever::cosine;

    #[test]
    fn mock_is_deterministic_and_unit_norm() {
        let ep = EmbedEndpoint::default();
        let texts = vec!["a grey road".to_string(), "a grey road".to_string()];
        let v = embed_texts(&texts, &ep).unwrap();
        assert_eq!(v[0], v[1]);
        assert_eq!(v[0].dim(), 1536);
        assert!((v[0].norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mock_vectors_of_distinct_texts_are_nearly_orthogonal() {
        let vs: Vec<Embedding> = (0..1000)
            .map(|i| mock_embedding(&format!("description number {i}"), 1536))
            .collect();
        let mut max = f64::MIN;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                max = max.max(cosine(&vs[i], &vs[j]).unwrap());
            }
        }
        assert!(max < 0.5, "max pairwise cosine {max}");
    }

    #[test]
    fn unreachable_endpoint_reports_attempts() {
        let ep = EmbedEndpoint {
            url: "http://127.0.0.1:9/embed".into(),
            max_retries: 1,
            backoff: Duration::from_millis(1),
            timeout: Duration::from_secs(2),
            ..EmbedEndpoint::default()
        };
        let err = embed_texts(&["x".into()], &ep).unwrap_err();
        assert!(matches!(err, LangError::Unreachable { attempts: 2, .. }));
        assert!(err.is_io());
    }
}
