use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight creative dimensions a narrative strategy can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Plot,
    Character,
    Information,
    Emotional,
    Linguistic,
    Pacing,
    Thematic,
    Engagement,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::Plot,
        Dimension::Character,
        Dimension::Information,
        Dimension::Emotional,
        Dimension::Linguistic,
        Dimension::Pacing,
        Dimension::Thematic,
        Dimension::Engagement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Plot => "Plot",
            Dimension::Character => "Character",
            Dimension::Information => "Information",
            Dimension::Emotional => "Emotional",
            Dimension::Linguistic => "Linguistic",
            Dimension::Pacing => "Pacing",
            Dimension::Thematic => "Thematic",
            Dimension::Engagement => "Engagement",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            Dimension::Plot => "Strategies for plot construction and story progression, e.g., causation, escalation, conflict setup and resolution, reversals and twists, and act and beat frameworks.",
            Dimension::Character => "Strategies for character development and portrayal, e.g., growth, traits, relationships, and archetypal roles.",
            Dimension::Information => "Strategies for information control and perspective, e.g., revelation, concealment, misdirection, foreshadowing, and point-of-view manipulation.",
            Dimension::Emotional => "Strategies for emotional effect, e.g., tension, empathy, surprise, catharsis, and atmosphere.",
            Dimension::Linguistic => "Strategies for language style, e.g., voice, imagery, syntax and rhythm, dialogue, and rhetorical devices.",
            Dimension::Pacing => "Strategies for pacing at the moment and segment levels, e.g., scene versus summary, time compression and expansion, beat density, sentence and paragraph cadence, cutaways and cross-cutting, time skips, and arrive-late, leave-early trims.",
            Dimension::Thematic => "Strategies for theme and meaning, e.g., symbolism, allegory, and philosophical exploration.",
            Dimension::Engagement => "Strategies for reader engagement, e.g., hooks, immersion techniques, curiosity creation, suspense management, and narrative payoffs.",
        }
    }

    /// Taxonomy listing in the form the categorization prompt expects.
    pub fn taxonomy() -> String {
        Dimension::ALL
            .iter()
            .map(|d| format!("- {}: {}", d.name().to_uppercase(), d.definition()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown dimension {0:?}")]
pub struct UnknownDimension(pub String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    /// Case-insensitive match against the eight names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        Dimension::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| UnknownDimension(s.to_string()))
    }
}

/// The five plot turning points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TurningPoint {
    Opportunity,
    ChangeOfPlans,
    PointOfNoReturn,
    MajorSetback,
    Climax,
}

impl TurningPoint {
    pub const ALL: [TurningPoint; 5] = [
        TurningPoint::Opportunity,
        TurningPoint::ChangeOfPlans,
        TurningPoint::PointOfNoReturn,
        TurningPoint::MajorSetback,
        TurningPoint::Climax,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TurningPoint::Opportunity => "Opportunity",
            TurningPoint::ChangeOfPlans => "Change of Plans",
            TurningPoint::PointOfNoReturn => "Point of No Return",
            TurningPoint::MajorSetback => "Major Setback",
            TurningPoint::Climax => "Climax",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            TurningPoint::Opportunity => "The introductory event that sets the stage for the narrative.",
            TurningPoint::ChangeOfPlans => {
                "A pivotal moment where the main goal of the narrative is defined or altered."
            }
            TurningPoint::PointOfNoReturn => {
                "The commitment point beyond which the protagonists are invested in goals."
            }
            TurningPoint::MajorSetback => {
                "A critical juncture where the protagonists face significant challenges or failures."
            }
            TurningPoint::Climax => {
                "The peak of the narrative arc, encompassing the resolution of the central conflict."
            }
        }
    }

    fn key(self) -> &'static str {
        match self {
            TurningPoint::Opportunity => "opportunity",
            TurningPoint::ChangeOfPlans => "changeofplans",
            TurningPoint::PointOfNoReturn => "pointofnoreturn",
            TurningPoint::MajorSetback => "majorsetback",
            TurningPoint::Climax => "climax",
        }
    }
}

impl fmt::Display for TurningPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown turning point {0:?}")]
pub struct UnknownTurningPoint(pub String);

impl FromStr for TurningPoint {
    type Err = UnknownTurningPoint;

    /// Accepts "Change of Plans", "ChangeOfPlans", "change_of_plans", etc.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        TurningPoint::ALL
            .into_iter()
            .find(|t| t.key() == key)
            .ok_or_else(|| UnknownTurningPoint(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_parsing_is_case_insensitive() {
        assert_eq!("PLOT".parse::<Dimension>().unwrap(), Dimension::Plot);
        assert_eq!(" emotional ".parse::<Dimension>().unwrap(), Dimension::Emotional);
        assert!("VIBES".parse::<Dimension>().is_err());
    }

    #[test]
    fn turning_point_spellings() {
        assert_eq!(
            "Change of Plans".parse::<TurningPoint>().unwrap(),
            TurningPoint::ChangeOfPlans
        );
        assert_eq!(
            "point_of_no_return".parse::<TurningPoint>().unwrap(),
            TurningPoint::PointOfNoReturn
        );
        assert_eq!("Climax".parse::<TurningPoint>().unwrap(), TurningPoint::Climax);
        assert!("Denouement".parse::<TurningPoint>().is_err());
    }

    #[test]
    fn taxonomy_lists_every_dimension() {
        let t = Dimension::taxonomy();
        assert_eq!(t.lines().count(), 8);
        assert!(t.starts_with("- PLOT: Strategies for plot construction"));
    }
}
