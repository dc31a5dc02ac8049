pub mod actuator;
pub mod assembly;
pub mod flight;
pub mod geometry;
pub mod safety;
pub mod scissor;
pub mod sim;
