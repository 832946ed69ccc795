pub mod bounds;
pub mod domains;
pub mod game;
pub mod hsvi;
pub mod init;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod play;
pub mod stage;
