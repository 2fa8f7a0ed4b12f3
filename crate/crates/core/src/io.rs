//! JSON game files.
//!
//! ```json
//! {"n": 1, "W": [1.0], "lower": [0.0], "upper": [2.0],
//!  "players": [{"value": {"family": "quadratic_clipped_value", "params": {"a": 3.0, "b": 1.0}},
//!               "cost": {"family": "quadratic_cost", "params": {"c0": 1.0}}}]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ScalarFunction;
use crate::game::Game;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpec {
    pub value: ScalarFunction,
    pub cost: ScalarFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub n: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub players: Vec<PlayerSpec>,
}

impl GameFile {
    pub fn from_game(game: &Game) -> Self {
        Self {
            n: game.n(),
            w: game.w().as_slice().to_vec(),
            lower: game.lower().to_vec(),
            upper: game.upper().to_vec(),
            players: game
                .values()
                .iter()
                .zip(game.costs())
                .map(|(v, c)| PlayerSpec { value: v.clone(), cost: c.clone() })
                .collect(),
        }
    }

    pub fn into_game(self) -> Result<Game> {
        let n = self.n;
        if self.w.len() != n * n {
            return Err(Error::InvalidGame(format!("W: expected {} entries for n = {n}, got {}", n * n, self.w.len())));
        }
        if self.players.len() != n {
            return Err(Error::InvalidGame(format!("players: expected {n} entries, got {}", self.players.len())));
        }
        let w = Matrix::from_row_major(n, n, self.w)?;
        let (values, costs) = self.players.into_iter().map(|p| (p.value, p.cost)).unzip();
        Game::new(w, self.lower, self.upper, values, costs)
    }
}

pub fn game_from_json(text: &str) -> Result<Game> {
    let file: GameFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidGame(format!("line {} column {}: {e}", e.line(), e.column())))?;
    file.into_game()
}

/// Canonical pretty JSON; equal games give identical bytes.
pub fn game_to_json(game: &Game) -> String {
    let mut s = serde_json::to_string_pretty(&GameFile::from_game(game)).expect("game files are always serializable");
    s.push('\n');
    s
}

pub fn load_game(path: impl AsRef<Path>) -> Result<Game> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    game_from_json(&text)
}

pub fn save_game(game: &Game, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, game_to_json(game)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casestudy::random_er_game;
    use crate::equivalence::EquivalenceMap;
    use crate::presets;

    const MINIMAL: &str = r#"{"n": 1, "W": [1.0], "lower": [0.0], "upper": [2.0],
        "players": [{"value": {"family": "quadratic_clipped_value", "params": {"a": 3.0, "b": 1.0}},
                     "cost": {"family": "quadratic_cost", "params": {"c0": 1.0}}}]}"#;

    #[test]
    fn minimal_file() {
        assert_eq!(game_from_json(MINIMAL).unwrap(), presets::single_player());
    }

    #[test]
    fn bad_diagonal() {
        let text = MINIMAL.replace(r#""W": [1.0]"#, r#""W": [2.0]"#);
        let err = game_from_json(&text).unwrap_err().to_string();
        assert!(err.contains("diagonal must be 1"), "{err}");
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = game_from_json(r#"{"n": 1, "W": [1.0], "lower": [0.0]}"#).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        let err = game_from_json(&MINIMAL.replace("\"n\": 1", "\"n\": 2")).unwrap_err().to_string();
        assert!(err.contains("W: expected 4"), "{err}");
        let err = game_from_json(&MINIMAL.replace("c0", "c9")).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let g = random_er_game(50, 1.0, 3.0, 1.0, 1.0, 11).unwrap();
        let text = game_to_json(&g);
        let back = game_from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(game_to_json(&back), text);

        let src = presets::two_sided();
        let map = EquivalenceMap::new(&src, vec![2.0, 1.0, 0.5, 3.0], vec![0.1, 0.0, -0.2, 0.3]).unwrap();
        let g = map.transform_game(&src).unwrap();
        assert_eq!(game_from_json(&game_to_json(&g)).unwrap(), g);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("pgg-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.json");
        let g = presets::two_sided();
        save_game(&g, &path).unwrap();
        assert_eq!(load_game(&path).unwrap(), g);
        std::fs::remove_dir_all(&dir).ok();
        assert!(matches!(load_game(dir.join("missing.json")), Err(Error::Io(_))));
    }
}
