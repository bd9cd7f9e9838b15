//! In-memory chat sessions. Each session sits behind its own async mutex, so
//! concurrent turns on one session queue while different sessions proceed
//! in parallel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use skeptik_core::gateway::ChatSession;

#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub analysis_id: String,
    pub session: ChatSession,
}

pub type SharedSession = Arc<tokio::sync::Mutex<SessionRecord>>;

#[derive(Debug, Default, Clone)]
pub struct SessionStore {
    inner: Arc<Mutex<HashMap<String, SharedSession>>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, record: SessionRecord) -> SharedSession {
        let id = record.session.session_id.clone();
        let shared = Arc::new(tokio::sync::Mutex::new(record));
        self.inner.lock().expect("session table poisoned").insert(id, shared.clone());
        shared
    }

    pub fn get(&self, session_id: &str) -> Option<SharedSession> {
        self.inner.lock().expect("session table poisoned").get(session_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("session table poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;
    use skeptik_core::gateway::ChatContext;

    #[test]
    fn insert_and_lookup() {
        let store = SessionStore::new();
        assert!(store.is_empty());
        let context = ChatContext {
            fallacy_code: "CP".into(),
            fallacy_name: "Cherry Picking".into(),
            definition: "d".into(),
            flagged_sentences: vec![],
            interventions: vec![],
        };
        store.insert(SessionRecord {
            analysis_id: "a".into(),
            session: ChatSession::new("s1", context, Utc::now()),
        });
        assert!(store.get("s1").is_some());
        assert!(store.get("s2").is_none());
        assert_eq!(store.len(), 1);
    }
}
