#pragma once

#include <string>
#include "run_config.hpp"

namespace fracmag::cli
{

// Each command writes its artifacts under the prepared output directory and returns the
// process exit code (0 ok, 1 validation failure).  Errors propagate as exceptions.
int CmdSpectrum(const RunConfig &cfg);
int CmdSolve(const RunConfig &cfg);
int CmdSweepS(const RunConfig &cfg);
int CmdValidate(const RunConfig &cfg);

// Maps an exception to the documented exit code and its error JSON.
int ExitCodeFor(const std::exception &e);
Json ErrorJson(const std::exception &e);

}  // namespace fracmag::cli
