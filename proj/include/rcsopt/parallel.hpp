#pragma once

namespace rcsopt {

/// Execution mode for the data-parallel kernels (finite-difference
/// derivative fill, Monte Carlo batches). Every kernel has a serial
/// reference implementation; the OpenMP variant must produce bit-identical
/// results (work items are independent and write disjoint slots).
enum class ExecMode { Serial, OpenMp };

/// Process-wide default, settable once at startup (CLI/benchmarks).
ExecMode default_exec_mode();
void set_default_exec_mode(ExecMode mode);

}  // namespace rcsopt
