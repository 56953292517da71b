pub mod checkpoint;
pub mod csv;
pub mod report;
pub mod snapshot;
