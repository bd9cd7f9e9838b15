use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Gateway, GatewayError, Message, ProviderConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: ChatRole,
    pub text: String,
}

/// What the model is told about the fallacy before the conversation starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatContext {
    pub fallacy_code: String,
    pub fallacy_name: String,
    pub definition: String,
    /// `(sentence index, text)` of every sentence flagged for the fallacy.
    pub flagged_sentences: Vec<(usize, String)>,
    /// `(level label, explanation)` of the interventions already generated.
    pub interventions: Vec<(String, String)>,
}

impl ChatContext {
    pub fn preamble(&self) -> String {
        let mut text = format!(
            "You are helping a reader examine a possible logical fallacy in a news article. \
             Treat the flag as a possibility, not a verdict.\n\
             Fallacy: {} ({})\nDefinition: {}\nFlagged sentences:\n",
            self.fallacy_name, self.fallacy_code, self.definition
        );
        for (index, sentence) in &self.flagged_sentences {
            text.push_str(&format!("[{index}] {sentence}\n"));
        }
        if !self.interventions.is_empty() {
            text.push_str("Interventions already shown to the reader:\n");
            for (level, explanation) in &self.interventions {
                text.push_str(&format!("{level}: {explanation}\n"));
            }
        }
        text.push_str("Answer the reader's questions about this fallacy in this article.");
        text
    }
}

/// A per-fallacy conversation. History alternates user/assistant, starting
/// with the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSession {
    pub session_id: String,
    pub fallacy_code: String,
    pub context: ChatContext,
    history: Vec<ChatTurn>,
    pub created_at: DateTime<Utc>,
}

impl ChatSession {
    pub fn new(session_id: impl Into<String>, context: ChatContext, created_at: DateTime<Utc>) -> Self {
        Self {
            session_id: session_id.into(),
            fallacy_code: context.fallacy_code.clone(),
            context,
            history: Vec::new(),
            created_at,
        }
    }

    pub fn history(&self) -> &[ChatTurn] {
        &self.history
    }

    /// The flagged sentences the conversation is about.
    pub fn article_context(&self) -> &[(usize, String)] {
        &self.context.flagged_sentences
    }

    fn messages_with(&self, user_message: &str) -> Vec<Message> {
        let mut messages = Vec::with_capacity(self.history.len() + 2);
        messages.push(Message::system(self.context.preamble()));
        for turn in &self.history {
            messages.push(match turn.role {
                ChatRole::User => Message::user(turn.text.clone()),
                ChatRole::Assistant => Message::assistant(turn.text.clone()),
            });
        }
        messages.push(Message::user(user_message));
        messages
    }
}

/// Run one chat exchange. The session is only modified when the provider
/// answers: on error its history is left as it was.
pub async fn chat_turn(
    gateway: &Gateway,
    session: &mut ChatSession,
    user_message: &str,
    config: &ProviderConfig,
) -> Result<String, GatewayError> {
    if user_message.trim().is_empty() {
        return Err(GatewayError::InvalidRequest("chat message is empty".into()));
    }
    let reply = gateway.send(session.messages_with(user_message), config).await?;
    session.history.push(ChatTurn { role: ChatRole::User, text: user_message.to_string() });
    session.history.push(ChatTurn { role: ChatRole::Assistant, text: reply.clone() });
    Ok(reply)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{MockProvider, MOCK_PROVIDER_ID};
    use std::sync::Arc;

    fn session() -> ChatSession {
        ChatSession::new(
            "s1",
            ChatContext {
                fallacy_code: "CP".into(),
                fallacy_name: "Cherry Picking".into(),
                definition: "Selectively presenting evidence.".into(),
                flagged_sentences: vec![(4, "Only the data from 2019 matters.".into())],
                interventions: vec![("L1".into(), "Other years disagree.".into())],
            },
            Utc::now(),
        )
    }

    fn gateway() -> Gateway {
        Gateway::new().with_provider(Arc::new(MockProvider::default()))
    }

    fn cfg() -> ProviderConfig {
        ProviderConfig::new(MOCK_PROVIDER_ID, "mock-1").with_temperature(0.7)
    }

    #[tokio::test]
    async fn one_turn_appends_two() {
        let mut s = session();
        let reply = chat_turn(&gateway(), &mut s, "why is this cherry picking?", &cfg())
            .await
            .unwrap();
        assert!(!reply.is_empty());
        assert_eq!(s.history().len(), 2);
        assert_eq!(s.history()[1].text, reply);
    }

    #[tokio::test]
    async fn three_turns_alternate() {
        let mut s = session();
        for msg in ["one?", "two?", "three?"] {
            chat_turn(&gateway(), &mut s, msg, &cfg()).await.unwrap();
        }
        assert_eq!(s.history().len(), 6);
        for (i, turn) in s.history().iter().enumerate() {
            let expected = if i % 2 == 0 { ChatRole::User } else { ChatRole::Assistant };
            assert_eq!(turn.role, expected);
        }
    }

    #[tokio::test]
    async fn empty_message_rejected_and_history_unchanged() {
        let mut s = session();
        let err = chat_turn(&gateway(), &mut s, "  ", &cfg()).await.unwrap_err();
        assert!(matches!(err, GatewayError::InvalidRequest(_)));
        assert!(s.history().is_empty());

        let missing = ProviderConfig::new("absent", "m");
        assert!(chat_turn(&gateway(), &mut s, "hello", &missing).await.is_err());
        assert!(s.history().is_empty());
    }

    #[test]
    fn preamble_carries_context() {
        let p = session().context.preamble();
        assert!(p.contains("Cherry Picking (CP)"));
        assert!(p.contains("[4] Only the data from 2019 matters."));
        assert!(p.contains("L1: Other years disagree."));
    }
}
