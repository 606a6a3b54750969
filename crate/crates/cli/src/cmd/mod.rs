pub mod corpus;
pub mod extend;
pub mod misc;
pub mod mix;
pub mod verify;
