fn main() { oam_fso::cli::run(); }
