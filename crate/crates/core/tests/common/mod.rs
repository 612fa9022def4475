pub mod cases;
pub mod gradcheck;
pub mod oracle;
pub mod toy;
