use bridgewire::conformance::TrackingAllocator;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

fn main() {
    std::process::exit(bridgewire::cli::main_with_args(std::env::args_os()));
}
