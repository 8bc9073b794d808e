use crate::model::{ItemId, UserId};
use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate rating for user {user} item {item}")]
    DuplicateRating { user: UserId, item: ItemId },

    #[error("rating {rating} for user {user} item {item} is outside 1-5")]
    RatingOutOfRange {
        user: UserId,
        item: ItemId,
        rating: u8,
    },

    #[error("user id {0} out of range")]
    UserOutOfRange(UserId),

    #[error("item id {0} out of range")]
    ItemOutOfRange(ItemId),

    #[error("group must have at least one member")]
    EmptyGroup,

    #[error("duplicate member {0} in group")]
    DuplicateMember(UserId),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("factorization requires at least one train rating")]
    EmptyTrainSet,

    #[error("non-finite value during factorization at iteration {0}")]
    NonFinite(usize),

    #[error("item {0} is already selected or observed")]
    NotACandidate(ItemId),

    #[error("item {0} is already selected")]
    AlreadySelected(ItemId),

    #[error("negative running sum for observed item {0}: state is corrupted")]
    CorruptState(ItemId),

    #[error("invalid saturation: {0}")]
    InvalidSaturation(String),

    #[error("k must be at least 1")]
    InvalidK,

    #[error("candidate set is empty")]
    NoCandidates,

    #[error("selection already started; reset the state first")]
    StateNotEmpty,

    #[error("{subsets} subsets exceed the enumeration cap {cap}")]
    EnumerationCap { subsets: u128, cap: u128 },

    #[error("lambda {0} is outside [0, 1]")]
    InvalidLambda(f64),

    #[error("holdout fraction {frac} selects {chosen} of {n_items} items; need a strict nonempty subset")]
    InvalidHoldout {
        frac: f64,
        chosen: usize,
        n_items: usize,
    },

    #[error("not enough eligible users: need {need}, have {have}")]
    NotEnoughUsers { need: usize, have: usize },

    #[error("similar group formation requires user features")]
    MissingFeatures,
}

pub type Result<T> = std::result::Result<T, Error>;
