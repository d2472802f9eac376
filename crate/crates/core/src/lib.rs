pub mod cli;
pub mod featurize;
pub mod frontend;
pub mod graphs;
pub mod model;
pub mod numcore;
pub mod pipeline;
