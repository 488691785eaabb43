#include "rcsopt/parallel.hpp"

namespace rcsopt {

namespace {
ExecMode g_mode = ExecMode::OpenMp;
}

ExecMode default_exec_mode() { return g_mode; }
void set_default_exec_mode(ExecMode mode) { g_mode = mode; }

}  // namespace rcsopt
