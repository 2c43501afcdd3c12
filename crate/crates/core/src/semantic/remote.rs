//! HTTP client for the embedding sidecar.
//!
//! `GET /info` returns `{model_id, dimension, max_tokens, pooled_default}`;
//! `POST /embed` takes `{texts, pooled}` and returns
//! `{model_id, dimension, matrices, token_counts}` with one `n × d` float
//! array per text.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingMatrix, EmbeddingProvider, ProviderError};

/// Largest batch the sidecar accepts in one request.
pub const MAX_REMOTE_BATCH: usize = 64;

const MAX_RESPONSE_BYTES: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub model_id: String,
    pub dimension: usize,
    pub max_tokens: usize,
    pub pooled_default: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequestBody {
    pub texts: Vec<String>,
    pub pooled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponseBody {
    pub model_id: String,
    pub dimension: usize,
    pub matrices: Vec<Vec<Vec<f32>>>,
    pub token_counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RemoteProvider {
    base_url: String,
    agent: ureq::Agent,
    info: InfoResponse,
    pooled: bool,
}

impl RemoteProvider {
    /// Fetches `/info` and returns a provider bound to that model. `pooled`
    /// overrides the sidecar's default pooling when set.
    pub fn connect(base_url: &str, timeout: Duration, pooled: Option<bool>) -> Result<Self, ProviderError> {
        let base_url = base_url.trim_end_matches('/').to_string();
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        let agent: ureq::Agent = config.into();
        let label = base_url.clone();
        let mut resp = agent
            .get(format!("{base_url}/info"))
            .call()
            .map_err(|e| transport(&label, e))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(ProviderError::Transport {
                model_id: label,
                message: format!("GET /info returned HTTP {status}"),
            });
        }
        let info: InfoResponse = read_json(resp.body_mut(), &label)?;
        if info.model_id.is_empty() || info.dimension == 0 {
            return Err(ProviderError::Protocol {
                model_id: label,
                message: format!("invalid /info payload {info:?}"),
            });
        }
        Ok(Self {
            pooled: pooled.unwrap_or(info.pooled_default),
            base_url,
            agent,
            info,
        })
    }

    pub fn info(&self) -> &InfoResponse {
        &self.info
    }

    fn post_embed(&self, docs: &[(&str, &str)]) -> Result<Vec<EmbeddingMatrix<f32>>, ProviderError> {
        let model_id = &self.info.model_id;
        let body = EmbedRequestBody {
            texts: docs.iter().map(|(_, t)| t.to_string()).collect(),
            pooled: self.pooled,
        };
        let mut resp = self
            .agent
            .post(format!("{}/embed", self.base_url))
            .send_json(&body)
            .map_err(|e| transport(model_id, e))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Transport {
                model_id: model_id.clone(),
                message: format!("POST /embed returned HTTP {status}: {}", detail.trim()),
            });
        }
        let parsed: EmbedResponseBody = read_json(resp.body_mut(), model_id)?;
        self.unpack(docs, parsed)
    }

    fn unpack(
        &self,
        docs: &[(&str, &str)],
        resp: EmbedResponseBody,
    ) -> Result<Vec<EmbeddingMatrix<f32>>, ProviderError> {
        let model_id = &self.info.model_id;
        let protocol = |message: String| ProviderError::Protocol {
            model_id: model_id.clone(),
            message,
        };
        if resp.model_id != *model_id {
            return Err(protocol(format!("response from model {:?}", resp.model_id)));
        }
        if resp.dimension != self.info.dimension {
            return Err(protocol(format!(
                "response dimension {} but /info reported {}",
                resp.dimension, self.info.dimension
            )));
        }
        if resp.matrices.len() != docs.len() || resp.token_counts.len() != docs.len() {
            return Err(protocol(format!(
                "{} matrices / {} token counts for {} texts",
                resp.matrices.len(),
                resp.token_counts.len(),
                docs.len()
            )));
        }
        docs.iter()
            .zip(resp.matrices)
            .zip(resp.token_counts)
            .map(|(((id, _), rows), n)| {
                if rows.len() != n {
                    return Err(protocol(format!("token count {n} but {} rows for {id:?}", rows.len())));
                }
                let m = EmbeddingMatrix::from_rows(*id, model_id.clone(), &rows)
                    .map_err(|e| protocol(format!("{id:?}: {e}")))?;
                if m.dim() != self.info.dimension {
                    return Err(protocol(format!("{id:?}: row width {}", m.dim())));
                }
                Ok(m)
            })
            .collect()
    }
}

fn transport(model_id: &str, e: ureq::Error) -> ProviderError {
    ProviderError::Transport {
        model_id: model_id.to_string(),
        message: e.to_string(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(body: &mut ureq::Body, model_id: &str) -> Result<T, ProviderError> {
    let reader = body.with_config().limit(MAX_RESPONSE_BYTES).reader();
    serde_json::from_reader(reader).map_err(|e| {
        if e.is_io() {
            ProviderError::Transport {
                model_id: model_id.to_string(),
                message: e.to_string(),
            }
        } else {
            ProviderError::Protocol {
                model_id: model_id.to_string(),
                message: e.to_string(),
            }
        }
    })
}

impl EmbeddingProvider for RemoteProvider {
    fn model_id(&self) -> &str {
        &self.info.model_id
    }

    fn dimension(&self) -> usize {
        self.info.dimension
    }

    fn pooled(&self) -> bool {
        self.pooled
    }

    fn embed(&self, patent_id: &str, text: &str) -> Result<EmbeddingMatrix<f32>, ProviderError> {
        let mut out = self.post_embed(&[(patent_id, text)])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, docs: &[(&str, &str)]) -> Result<Vec<EmbeddingMatrix<f32>>, ProviderError> {
        let mut out = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(MAX_REMOTE_BATCH) {
            out.extend(self.post_embed(chunk)?);
        }
        Ok(out)
    }
}
