#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "shh/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Action-token routing and evaluation for speech hypotheses"};
  app.require_subcommand(1);

  shh::CommandOptions opts;
  std::size_t workers = 0;

  auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "Run configuration (JSON)");
    sub->add_option("--dataset", opts.dataset, "Samples (JSONL)");
    sub->add_option("--out", opts.out, "Output directory")->default_val(".");
    sub->add_option("--workers", workers, "Worker threads (overrides config)");
    sub->add_flag("--strict", opts.strict, "Abort on replay misses");
    sub->add_flag("-q,--quiet", opts.quiet, "No summary on stdout");
    return sub;
  };

  add("label", "Decode samples and write oracle action-token labels");
  add("format-sft", "Export labeled examples as prompt/target pairs")
      ->add_option("--labels", opts.labels, "Labeled examples (JSONL)");
  auto* route = add("route", "Route samples through an arbitration policy");
  route->add_option("--policy", opts.policy, "model | oracle | cascade_ger | fixed:<token>");
  auto* eval = add("eval", "Score traces against gold answers");
  eval->add_option("--traces", opts.traces, "Routing traces (JSONL)")->required();
  eval->add_option("--labels", opts.labels, "Labeled examples providing oracle tokens");
  add("oracle", "Best-candidate bound over hypotheses")
      ->add_option("--hypotheses", opts.hypotheses, "Rows with sample_id and hypotheses");
  add("report", "Re-render tables from report.json")
      ->add_option("--report", opts.report, "report.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : shh::kExitFatal;
  }
  if (workers > 0) opts.workers = workers;
  return shh::run_command(app.get_subcommands().front()->get_name(), opts);
}
