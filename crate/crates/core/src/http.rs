//! Blocking JSON-over-HTTP helper shared by the service-backed clients.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct JsonService {
    agent: Agent,
    url: String,
    attempts: u32,
    backoff: Duration,
}

impl JsonService {
    pub fn new(base: &str, route: &str) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        JsonService {
            agent,
            url: format!("{}{}", base.trim_end_matches('/'), route),
            attempts: 3,
            backoff: Duration::from_millis(100),
        }
    }

    pub fn with_retries(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// POSTs `body` and decodes the reply, retrying on transport errors,
    /// non-2xx statuses and undecodable bodies.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp> {
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let reply = self
                .agent
                .post(&self.url)
                .send_json(body)
                .and_then(|mut r| r.body_mut().read_json::<Resp>());
            match reply {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::debug!("{} attempt {}: {e}", self.url, attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(Error::Backend(format!(
            "{} failed after {} attempts: {last}",
            self.url, self.attempts
        )))
    }
}
