#pragma once

namespace labmatch {

// Kernels that have an OpenMP version also keep a plain loop so tests and
// benchmarks can compare the two.
enum class Exec { serial, parallel };

void set_threads(int n);
int max_threads();

} // namespace labmatch
