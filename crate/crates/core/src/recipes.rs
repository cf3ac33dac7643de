//! Parameter sets of the published figures, copied from their captions.
//! Anything a caption leaves open stays `None` and falls back to the
//! command defaults.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Flux;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
    pub alpha: Option<Flux>,
    pub hopping: Option<f64>,
    pub field: Option<f64>,
    pub width: Option<usize>,
    /// Initial kinetic energy as an expression in `J` and `wc`.
    pub kinetic_energy: Option<&'static str>,
    /// Output times in Bloch periods.
    pub checkpoints_tb: Vec<f64>,
}

impl Recipe {
    fn blank(name: &'static str, description: &'static str) -> Self {
        Recipe {
            name,
            description,
            alpha: None,
            hopping: None,
            field: None,
            width: None,
            kinetic_energy: None,
            checkpoints_tb: Vec::new(),
        }
    }
}

fn tenth() -> Option<Flux> {
    Some(Flux::new(1, 10).expect("1/10 is a valid flux"))
}

pub fn figure_recipes() -> Vec<Recipe> {
    vec![
        Recipe {
            alpha: tenth(),
            hopping: Some(1.0),
            width: Some(40),
            ..Recipe::blank("fig1", "magnetic bands and strip spectrum with edge states")
        },
        Recipe {
            alpha: tenth(),
            field: Some(0.02),
            kinetic_energy: Some("-2J+wc/2"),
            ..Recipe::blank("fig2", "classical trajectory with edge-mediated Bloch oscillations")
        },
        Recipe {
            alpha: tenth(),
            hopping: Some(1.0),
            field: Some(0.02),
            width: Some(40),
            ..Recipe::blank("fig3", "Landau-Stark states and their spatial density")
        },
        Recipe {
            alpha: tenth(),
            hopping: Some(1.0),
            width: Some(10),
            ..Recipe::blank("fig4", "quasienergy flow against the field and spacing statistics")
        },
        Recipe {
            checkpoints_tb: vec![0.0, 200.0, 400.0],
            ..Recipe::blank("fig5", "wave-packet proliferation over long times")
        },
    ]
}

pub fn recipe(name: &str) -> Result<Recipe> {
    figure_recipes()
        .into_iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::Config(format!("unknown recipe {name:?} (known: fig1..fig5)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn captions_are_copied() {
        assert_eq!(recipe("fig4").unwrap().width, Some(10));
        assert!(recipe("fig5").unwrap().checkpoints_tb.contains(&400.0));
        assert_eq!(recipe("fig2").unwrap().field, Some(0.02));
        assert!(recipe("fig6").is_err());
        assert_eq!(figure_recipes().len(), 5);
    }
}
