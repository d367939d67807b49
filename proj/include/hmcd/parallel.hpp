#pragma once

namespace hmcd {

// Selects between the serial reference kernels and their OpenMP versions.
// Both produce bit-identical results.
enum class Execution { serial, parallel };

// Number of OpenMP worker threads (1 when built without OpenMP).
int worker_threads();

// Sets the OpenMP worker count; n <= 0 leaves the runtime default.
void set_worker_threads(int n);

}  // namespace hmcd
