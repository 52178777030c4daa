#include <CLI11.hpp>
#include <iostream>

#include "maskcheck/frontend.h"
#include "maskcheck/pipeline.h"

int main(int argc, char** argv) {
  using namespace maskcheck;
  CLI::App app{"Verifies higher-order power side-channel security of masked programs"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string mode = "full", format = "text";
  bool quiet = false;
  auto* verify = app.add_subcommand("verify", "Verify a program");
  verify->add_option("file", cfg.input, "Program file")->required()->check(CLI::ExistingFile);
  verify->add_option("-d,--order", cfg.order, "Security order")->envname("MASKCHECK_ORDER");
  verify->add_option("-w,--width", cfg.width, "Bit width of the domain")->envname("MASKCHECK_WIDTH");
  verify->add_option("--mode", mode, "full or types")
      ->check(CLI::IsMember({"full", "types"}))
      ->envname("MASKCHECK_MODE");
  verify->add_option("-j,--workers", cfg.workers, "Counting workers")->envname("MASKCHECK_WORKERS");
  verify->add_option("--budget", cfg.budget_bits, "Counting bit budget")->envname("MASKCHECK_BUDGET");
  verify->add_option("--smt-dir", cfg.smt_dir, "Directory for SMT formulas")->envname("MASKCHECK_SMT_DIR");
  verify->add_option("--solver", cfg.solver, "SMT solver command")->envname("MASKCHECK_SOLVER");
  verify->add_option("--patterns", cfg.patterns, "Pattern store file")->envname("MASKCHECK_PATTERNS");
  verify->add_option("--format", format, "text or json")
      ->check(CLI::IsMember({"text", "json"}))
      ->envname("MASKCHECK_FORMAT");
  verify->add_flag("-q,--quiet", quiet, "No progress output");

  std::string print_file;
  int print_width = 8;
  auto* print = app.add_subcommand("print", "Print the elaborated program");
  print->add_option("file", print_file, "Program file")->required()->check(CLI::ExistingFile);
  print->add_option("-w,--width", print_width, "Bit width of the domain")->envname("MASKCHECK_WIDTH");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*print) {
      std::cout << print_program(load_program(print_file, print_width));
      return 0;
    }
    cfg.mode = mode == "types" ? Mode::Types : Mode::Full;
    cfg.format = format == "json" ? Format::Json : Format::Text;
    Progress progress;
    if (!quiet) progress = [](const std::string& s) { std::cerr << "maskcheck: " << s << "\n"; };
    Report r = run(cfg, progress);
    std::cout << emit_report(r, cfg.format);
    return r.exit_code();
  } catch (const FrontendError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "maskcheck: error: " << e.what() << "\n";
    return 3;
  }
}
