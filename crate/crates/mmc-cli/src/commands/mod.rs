pub mod complete;
pub mod effective_rank;
pub mod fitlink;
pub mod split_cmd;
pub mod synth;
