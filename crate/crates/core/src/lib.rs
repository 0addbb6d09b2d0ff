pub mod field;
pub mod formula;
pub mod g_game;
pub mod h_game;
pub mod poly;
pub mod proof;
pub mod search_tree;
pub mod seeds;
pub mod harness;
