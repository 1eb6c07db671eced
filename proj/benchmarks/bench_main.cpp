#include <benchmark/benchmark.h>

// The distro's benchmark_main archive carries LTO bytecode from another compiler
// release and fails to link, so the entry point lives here.
BENCHMARK_MAIN();
