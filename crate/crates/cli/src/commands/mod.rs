pub mod evaluate;
pub mod mission;
pub mod report;
pub mod train;
pub mod zone;
