pub mod depoly;
pub mod frag;
