// ivpanel command-line interface.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 estimation error. Errors are printed to stderr as one JSON object.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ivpanel/error.hpp"
#include "ivpanel/pipeline.hpp"
#include "ivpanel/synth_records.hpp"

namespace fs = std::filesystem;
using namespace ivpanel;

namespace {

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const EstimationError*>(&e)) return 4;
  return 1;
}

std::string kind_of(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const EstimationError*>(&e)) return "estimation_error";
  if (dynamic_cast<const DataError*>(&e)) return "data_error";
  return "error";
}

int report_error(const Error& e) {
  const int code = exit_code_for(e);
  nlohmann::json j{{"error",
                    {{"kind", kind_of(e)}, {"module", e.module()}, {"operation", e.operation()}, {"message", e.detail()}}},
                   {"exit_code", code}};
  std::cerr << j.dump() << '\n';
  return code;
}

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string input;
  bool dry_run = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "Pipeline config file (sectioned key = value)");
  cmd->add_option("--set", c.sets, "Override a config value: section.key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Master seed (overrides run.seed)");
  cmd->add_option("--out", c.out, "Output directory (overrides output.dir)");
  cmd->add_option("--input", c.input, "Input directory (overrides input.dir)");
  cmd->add_flag("--dry-run", c.dry_run, "Validate the configuration and list outputs without writing anything");
  cmd->add_flag("-q,--quiet", c.quiet, "Do not echo the run log");
}

pipeline::PipelineConfig resolve_config(const Common& c) {
  config::Values overrides;
  for (const auto& s : c.sets) {
    auto [k, v] = config::parse_assignment(s);
    overrides[k] = v;
  }
  if (c.seed) overrides["run.seed"] = std::to_string(*c.seed);
  if (!c.out.empty()) overrides["output.dir"] = c.out;
  if (!c.input.empty()) overrides["input.dir"] = c.input;
  std::optional<fs::path> file;
  if (!c.config_file.empty()) file = c.config_file;
  return pipeline::load_config(file, overrides);
}

int run_stages(const Common& c, const std::set<pipeline::Stage>& stages) {
  const auto cfg = resolve_config(c);
  if (c.dry_run) {
    std::cout << "dry run: configuration valid (hash " << cfg.hash() << ")\n"
              << "would write to " << cfg.output_dir.string() << ":\n";
    for (const auto& f : pipeline::planned_artifacts(cfg, stages)) std::cout << "  " << f << '\n';
    return 0;
  }
  const auto r = pipeline::execute(cfg, stages, c.quiet ? nullptr : &std::cerr);
  pipeline::write_artifacts(r);
  if (!c.quiet) std::cerr << "wrote " << r.artifacts.size() << " files to " << cfg.output_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instrumental-variable analysis of research funding on scholar-year panels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pipeline::kVersion);

  struct Cmd {
    std::string name;
    std::string help;
    std::set<pipeline::Stage> stages;
  };
  using pipeline::Stage;
  const std::vector<Cmd> cmds{
      {"ingest", "Load records and build the scholar-year panel", {Stage::Ingest}},
      {"topics", "Fit the topic model on grant abstracts and assign topics", {Stage::Topics}},
      {"instruments", "Construct the employment, dominance and familiarity instruments", {Stage::Instruments}},
      {"estimate", "OLS and 2SLS estimates per outcome", {Stage::Estimate}},
      {"diagnose", "Instrument validity and strength diagnostics", {Stage::Diagnose}},
      {"placebo", "Pseudo-group placebo regressions", {Stage::Placebo}},
      {"windows", "First-stage strength across employment windows", {Stage::Windows}},
      {"run", "Full pipeline: every stage and report", pipeline::all_stages()},
  };
  std::vector<Common> opts(cmds.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    auto* s = app.add_subcommand(cmds[i].name, cmds[i].help);
    add_common(s, opts[i]);
    subs.push_back(s);
  }

  RecordDgpConfig synth;
  std::string synth_out = "synthetic";
  bool synth_dry = false;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic input records with known ground truth");
  synth_cmd->add_option("--scholars", synth.n_scholars, "Number of scholars")->capture_default_str();
  synth_cmd->add_option("--affiliations", synth.n_affiliations, "Number of universities")->capture_default_str();
  synth_cmd->add_option("--topics", synth.n_topics, "Number of generating topics")->capture_default_str();
  synth_cmd->add_option("--start-year", synth.start_year, "First panel year")->capture_default_str();
  synth_cmd->add_option("--end-year", synth.end_year, "Last panel year")->capture_default_str();
  synth_cmd->add_option("--beta1", synth.beta1, "True funding effect on average citations")->capture_default_str();
  synth_cmd->add_option("--rho", synth.rho, "Correlation of selection and outcome errors")->capture_default_str();
  synth_cmd->add_option("--eligible-share", synth.eligible_share, "Share of scholars who can be funded")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth_cmd->add_flag("--dry-run", synth_dry, "Validate and list outputs without writing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report_error(ConfigError("cli", "parse", e.what()));
  }

  try {
    if (synth_cmd->parsed()) {
      const fs::path out(synth_out);
      if (synth_dry) {
        synth.validate();
        std::cout << "dry run: would write to " << out.string() << ":\n";
        for (const char* f : {"context.csv", "events.csv", "grants.csv", "ground_truth.json", "pipeline.toml",
                              "pubs.csv", "roles.csv", "scholars.csv"})
          std::cout << "  " << f << '\n';
        return 0;
      }
      const auto rec = generate_records(synth);
      write_records(rec, out);
      std::ofstream toml(out / "pipeline.toml", std::ios::binary);
      if (!toml) throw DataError("synthgen", "write", "cannot write " + (out / "pipeline.toml").string());
      toml << pipeline::synth_config_text(synth.start_year, synth.end_year, synth.n_topics, synth.seed);
      std::cerr << "synth: scholars=" << rec.scholars.size() << " grants=" << rec.grants.size()
                << " pubs=" << rec.pubs.size() << " roles=" << rec.roles.size() << " events=" << rec.events.size()
                << " -> " << out.string() << '\n';
      return 0;
    }
    for (std::size_t i = 0; i < cmds.size(); ++i)
      if (subs[i]->parsed()) return run_stages(opts[i], cmds[i].stages);
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    nlohmann::json j{{"error", {{"kind", "internal"}, {"message", e.what()}}}, {"exit_code", 1}};
    std::cerr << j.dump() << '\n';
    return 1;
  }
  return 0;
}
