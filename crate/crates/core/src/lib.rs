pub mod dag;
pub mod glm;
pub mod predict;
pub mod sim;
pub mod causal;
pub mod cli;
