use serde::{Deserialize, Serialize};

use super::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Stop,
    Go,
    Left,
    Right,
}

impl Command {
    pub fn word(self) -> &'static str {
        match self {
            Command::Stop => "stop",
            Command::Go => "go",
            Command::Left => "left",
            Command::Right => "right",
        }
    }

    pub const ALL: [Command; 4] = [Command::Stop, Command::Go, Command::Left, Command::Right];
}

/// First transcript word that names a command in `commands`.
pub fn match_command(transcript: &Transcript, commands: &[Command]) -> Option<Command> {
    transcript
        .words
        .iter()
        .find_map(|w| commands.iter().copied().find(|c| c.word() == w.word))
}
