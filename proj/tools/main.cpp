#include <cstdio>
#include <iostream>
#include <optional>
#include <CLI11.hpp>
#include "commands.hpp"

namespace
{

using fracmag::cli::Json;

struct Overrides
{
  std::string config;
  std::optional<std::string> output;
  std::optional<int> resolution;
  std::optional<double> s;
  std::optional<int> m_max;
  std::optional<long long> seed;
  std::optional<int> threads;
  std::vector<double> s_list;
};

void AddCommon(CLI::App *cmd, Overrides &o)
{
  cmd->add_option("-c,--config", o.config, "JSON run configuration")->required();
  cmd->add_option("-o,--output", o.output, "output directory (relative to $FRACMAG_OUTPUT_ROOT)");
  cmd->add_option("--resolution", o.resolution, "mesh resolution");
  cmd->add_option("--s", o.s, "fractional order");
  cmd->add_option("--m-max", o.m_max, "number of eigenpairs");
  cmd->add_option("--seed", o.seed, "seed for the randomized steps");
  cmd->add_option("--threads", o.threads,
                  "assembly threads; more than one disables the reproducible reduction");
}

// Flags override single JSON fields before schema validation.
Json Apply(Json j, const Overrides &o)
{
  if (!j.is_object())
  {
    throw fracmag::cli::ConfigError("config must be a JSON object");
  }
  if (o.output) j["output_dir"] = *o.output;
  if (o.resolution) j["resolution"] = *o.resolution;
  if (o.s) j["s"] = *o.s;
  if (o.m_max) j["m_max"] = *o.m_max;
  if (o.seed)
  {
    if (j.contains("problem") && j["problem"].is_object()) j["problem"]["seed"] = *o.seed;
    if (!j.contains("courant")) j["courant"] = Json::object();
    if (j["courant"].is_object()) j["courant"]["seed"] = *o.seed;
  }
  if (o.threads)
  {
    j["threads"] = *o.threads;
    j["reproducible"] = *o.threads <= 1;
  }
  if (!o.s_list.empty())
  {
    j["sweep"] = {{"s_list", o.s_list}};
  }
  return j;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Fractional magnetic Laplacian: spectra, critical points and validation"};
  app.require_subcommand(1);
  Overrides o;
  auto *spectrum = app.add_subcommand("spectrum", "eigenpairs and Courant-Fischer report");
  auto *solve = app.add_subcommand("solve", "critical points of the energy functional");
  auto *sweep = app.add_subcommand("sweep-s", "first eigenvalue against s, with the local limit");
  auto *validate = app.add_subcommand("validate", "self-checks against independent references");
  for (auto *c : {spectrum, solve, sweep, validate})
  {
    AddCommon(c, o);
  }
  sweep->add_option("--s-list", o.s_list, "comma separated fractional orders")->delimiter(',');

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::Success &e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError &e)
  {
    std::cerr << Json{{"error", {{"type", "usage"}, {"exit_code", 2}, {"message", e.what()}}}}.dump()
              << "\n";
    return 2;
  }

  try
  {
    const auto cfg = fracmag::cli::ParseConfig(Apply(fracmag::cli::LoadJson(o.config), o));
    if (spectrum->parsed()) return fracmag::cli::CmdSpectrum(cfg);
    if (solve->parsed()) return fracmag::cli::CmdSolve(cfg);
    if (sweep->parsed()) return fracmag::cli::CmdSweepS(cfg);
    return fracmag::cli::CmdValidate(cfg);
  }
  catch (const std::exception &e)
  {
    std::cerr << fracmag::cli::ErrorJson(e).dump() << "\n";
    return fracmag::cli::ExitCodeFor(e);
  }
}
