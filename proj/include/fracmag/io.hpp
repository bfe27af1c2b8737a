#pragma once

#include <string>
#include <json.hpp>
#include "fracmag/assembly.hpp"
#include "fracmag/nonlinear.hpp"
#include "fracmag/spectral.hpp"

namespace fracmag::io
{

using Json = nlohmann::ordered_json;

// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string ContentHash(const Json &j);

Json ToJson(const Mesh &mesh);
Json ToJson(const FormMetadata &meta);
// {d, real, imag, metadata}, row-major nested arrays.
Json ToJson(const FormMatrix &form);
Json ToJson(const Spectrum &spec, bool include_vectors = true);
Json ToJson(const CourantReport &rep);
Json ToJson(const CriticalPoint &cp, bool include_coefficients = true);
Json ToJson(const SolutionSet &set, bool include_coefficients = true);
Json ToJson(const LinkingDiagnostics &diag);
Json ToJson(const NonlinearityReport &rep);

// Row-major little-endian float64, real plane then imaginary plane.
void WriteMatrixBinary(const std::string &path, const Eigen::MatrixXcd &K);
Eigen::MatrixXcd ReadMatrixBinary(const std::string &path, int d);

// CSV bodies (header line first).  Numbers are printed with 17 significant digits.
std::string SpectrumCsv(const Spectrum &spec);
std::string SolutionsCsv(const SolutionSet &set);

// Prefixes `body` with "# config_hash: ..." and "# config: {...}" comment lines.
std::string WithConfigHeader(const std::string &body, const Json &config);

void WriteText(const std::string &path, const std::string &text);

}  // namespace fracmag::io
