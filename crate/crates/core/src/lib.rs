pub mod climate;
pub mod fixture;
pub mod grid;
pub mod resources;
pub mod uc;
pub mod reliability;
pub mod accreditation;
