// Command-line runner: loads a scenario, applies flag overrides and runs one
// pipeline. Exit codes: 0 ok, 2 config error, 3 physics error, 4 numerical.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "jrcss/pipelines.hpp"

namespace {

struct Flags {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeats;
};

jrcss::Scenario resolve(const Flags& f, const std::string& pipeline) {
  jrcss::json doc = f.scenario.empty() ? jrcss::json::object() : jrcss::read_scenario_document(f.scenario);
  if (!doc.is_object()) jrcss::fail_config("schema-violation", "(root): expected an object");
  if (!pipeline.empty()) doc["pipeline"] = pipeline;
  if (!f.out.empty()) doc["output_dir"] = f.out;
  if (f.seed) doc["seed"] = *f.seed;
  if (f.repeats) doc["repeats"] = *f.repeats;
  return jrcss::parse_scenario(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint radar, communication and spectrum-sensing simulator"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", flags.scenario, "Scenario JSON file (omit for defaults)");
    sub->add_option("--out", flags.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", flags.seed, "Base random seed");
    sub->add_option("--repeats", flags.repeats, "Monte Carlo repeats")->check(CLI::PositiveNumber);
  };

  const char* pipelines[] = {"generate", "radar-range", "radar-isar", "comm", "sense", "rate-study"};
  for (const char* name : pipelines) add_common(app.add_subcommand(name, std::string("Run the ") + name + " pipeline"));
  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    if (sub == validate) {
      const auto sc = resolve(flags, "");
      std::cout << jrcss::json{{"valid", true},
                               {"pipeline", jrcss::pipeline_name(sc.pipeline)},
                               {"scenario_digest", jrcss::scenario_digest(sc)}}
                       .dump(2)
                << '\n';
      return 0;
    }
    const auto sc = resolve(flags, sub->get_name());
    const auto report = jrcss::run(sc);
    auto doc = report.metrics_document();
    doc["output_dir"] = sc.output_dir;
    doc["wall_time_s"] = report.wall_time_s;
    std::cout << doc.dump(2) << '\n';
    return 0;
  } catch (const jrcss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
