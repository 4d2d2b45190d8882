//! Compiles and runs every code sample in the guide under `book/src`.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
mod model {}

#[doc = include_str!("../../../book/src/grid.md")]
mod grid {}

#[doc = include_str!("../../../book/src/simulation.md")]
mod simulation {}

#[doc = include_str!("../../../book/src/series.md")]
mod series {}

#[doc = include_str!("../../../book/src/stability.md")]
mod stability {}

#[doc = include_str!("../../../book/src/experiments.md")]
mod experiments {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
