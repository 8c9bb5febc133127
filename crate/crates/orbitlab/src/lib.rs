//! Construction kit and verification bench for shift-plus-nuclear operators
//! on mixed-norm sequence spaces, built on finite truncations.
//!
//! The crate builds a two-basis atlas (`f`-basis of the ambient space, `e`-basis
//! driving a forward shift `T e_j = e_{j+1}`), assembles sparse truncations of
//! the operator, certifies the quantitative inequalities the construction
//! rests on, and produces explicit orbit-approximation witnesses: powers `c`
//! with `||T^c x - g_0||` small for finitely supported `x`.

pub mod basis;
pub mod factorize;
pub mod io;
pub mod operator;
pub mod poly;
pub mod report;
pub mod scalar;
pub mod schedule;
pub mod variants;
pub mod verify;

use thiserror::Error;

pub type Idx = u128;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("index growth exceeds the 2^{0} budget at step {1}")]
    GrowthOverflow(u32, u32),
    #[error("index {0} outside the built horizon")]
    OutOfHorizon(Idx),
    #[error("index {0} lies in a removed block")]
    NotInDomain(Idx),
    #[error("index {0} is not in a lay-off interval")]
    NotLayOff(Idx),
    #[error("step {0}: polynomial net is not frozen yet")]
    NetNotFixed(u32),
    #[error("step {0} is not built")]
    StepNotBuilt(u32),
    #[error("operator input exceeds domain bound {0}")]
    DomainExceeded(Idx),
    #[error("power application exceeds the horizon near index {0}")]
    HorizonExceeded(Idx),
    #[error("grid net too large: {0}")]
    NetTooLarge(String),
    #[error("nuclear budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("leading coefficient is zero")]
    ZeroLeading,
    #[error("no sufficiently large coordinate below the cutoff")]
    NoLargeCoordinate,
    #[error("required polynomial missing from the frozen net")]
    NetMiss,
    #[error("coordinate ordering goes the other way; swap the arguments")]
    OrderingFails,
    #[error("summability partial sum exceeds budget: {0}")]
    Eq5Exceeded(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
