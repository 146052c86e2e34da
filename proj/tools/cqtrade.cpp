#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cqtrade/cqtrade.hpp"

using namespace cqtrade;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBound = 3;

struct QueryInput {
  std::string file;
  std::string inline_text;

  AdornedQuery load() const {
    if (!file.empty() && !inline_text.empty()) throw ValidationError("pass either --query or --inline, not both");
    if (!inline_text.empty()) return parse_query(inline_text);
    if (file.empty()) throw ValidationError("a query is required (--query FILE or --inline STR)");
    std::ifstream in(file);
    if (!in) throw IoError("cannot open query file " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_query(ss.str());
  }
};

void add_query_flags(CLI::App* cmd, QueryInput& q) {
  cmd->add_option("--query", q.file, "File holding the adorned query");
  cmd->add_option("--inline", q.inline_text, "Adorned query text");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::vector<std::string> split_request(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (in >> cur) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space/time tradeoff structures for answering adorned conjunctive queries"};
  app.require_subcommand(1);

  // analyze
  QueryInput aq;
  AnalyzeOptions aopt;
  std::string a_out;
  auto* analyze = app.add_subcommand("analyze", "Cover numbers, tradeoffs, decompositions and path frontier as JSON");
  add_query_flags(analyze, aq);
  analyze->add_option("--size-symbol", aopt.size_symbol, "Symbol for the database size")->capture_default_str();
  analyze->add_option("--grid-q", aopt.grid_q, "Denominator of the delta grid")->capture_default_str();
  analyze->add_option("--out", a_out, "Output file (default stdout)");

  // build
  QueryInput bq;
  std::string b_db, b_strategy = "adstruct", b_decomp, b_tau = "1/2", b_threshold, b_out;
  std::uint64_t b_delta = 0;
  int b_grid = 8;
  unsigned b_jobs = 1;
  auto* build = app.add_subcommand("build", "Build a structure and write it with its space ledger");
  add_query_flags(build, bq);
  build->add_option("--db", b_db, "Database manifest")->required();
  build->add_option("--strategy", b_strategy, "Answering strategy")
      ->check(CLI::IsMember({"adstruct", "decomp", "negation", "path", "bfs"}))
      ->capture_default_str();
  build->add_option("--decomposition", b_decomp, "Decomposition JSON for the decomp strategy");
  build->add_option("--time-exponent", b_tau, "Time budget exponent p/q (T = |D|^{p/q})")->capture_default_str();
  build->add_option("--threshold", b_threshold, "Exact threshold T for adstruct (overrides --time-exponent)");
  build->add_option("--delta", b_delta, "Degree threshold for the path strategy (default ceil(sqrt|D|))");
  build->add_option("--grid-q", b_grid, "Delta grid denominator when choosing a decomposition")->capture_default_str();
  build->add_option("--jobs", b_jobs, "Worker threads")->capture_default_str();
  build->add_option("--out", b_out, "Structure file")->required();

  // query
  std::string q_structure, q_db, q_requests, q_out;
  bool q_meter = false;
  unsigned q_jobs = 1;
  auto* query = app.add_subcommand("query", "Answer access requests against a structure file");
  query->add_option("--structure", q_structure, "Structure file written by build")->required();
  query->add_option("--db", q_db, "Database manifest the structure was built on")->required();
  query->add_option("--requests", q_requests, "Requests, one per line, values separated by whitespace (default stdin)");
  query->add_flag("--meter", q_meter, "Append the step count of each answer");
  query->add_option("--jobs", q_jobs, "Worker threads for structures rebuilt at load time")->capture_default_str();
  query->add_option("--out", q_out, "Output file (default stdout)");

  // bench
  BenchConfig cfg;
  QueryInput cq;
  std::string c_db, c_tau = "1/2", c_out, c_plot;
  std::vector<std::string> c_thresholds;
  std::uint64_t c_seed = 1;
  std::vector<std::uint64_t> c_seeds;
  auto* bench = app.add_subcommand("bench", "Run build and query sweeps; CSV rows and plot data");
  bench->add_option("--family", cfg.family, "Query family")
      ->check(CLI::IsMember({"star", "path", "triangle", "square", "custom"}))
      ->capture_default_str();
  bench->add_option("--k", cfg.k, "Star arity or path length")->capture_default_str();
  bench->add_option("--sizes", cfg.sizes, "Database sizes")->delimiter(',');
  bench->add_option("--thresholds", c_thresholds, "Thresholds T (cover families)")->delimiter(',');
  bench->add_option("--deltas", cfg.deltas, "Degree thresholds (path family)")->delimiter(',');
  bench->add_option("--time-exponent", c_tau, "Selects the cover for cover families")->capture_default_str();
  bench->add_flag("--adversarial", cfg.adversarial, "Path family: add a high-degree middle vertex");
  bench->add_flag("--compare-bfs", cfg.compare_bfs, "Path family: add BFS rows");
  bench->add_option("--seed", c_seed, "Seed")->capture_default_str();
  bench->add_option("--seeds", c_seeds, "Several seeds")->delimiter(',');
  bench->add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str();
  bench->add_option("--bound-constant", cfg.bound_constant, "Constant asserted against every bound")
      ->capture_default_str();
  bench->add_option("--sample", cfg.sample_requests, "Metered requests per point")->capture_default_str();
  bench->add_flag("--timing", cfg.timing, "Include build_millis (makes the CSV nondeterministic)");
  add_query_flags(bench, cq);
  bench->add_option("--db", c_db, "Database manifest (custom family)");
  bench->add_option("--out", c_out, "CSV file (default stdout)");
  bench->add_option("--plot", c_plot, "Plot-data JSON file");

  // generate
  std::string g_family, g_out, g_widths;
  std::uint64_t g_seed = 1, g_sets = 0, g_universe = 0, g_tuples = 0, g_vertices = 0, g_edges = 0, g_spike = 0;
  bool g_uniform = false;
  double g_density = 1;
  auto* generate = app.add_subcommand("generate", "Write a seeded synthetic database (manifest + TSV)");
  generate->add_option("family", g_family, "Instance family")
      ->required()
      ->check(CLI::IsMember({"set-family", "random-digraph", "layered-path", "adversarial-heavy"}));
  generate->add_option("--seed", g_seed, "Seed")->capture_default_str();
  generate->add_option("--sets", g_sets, "set-family: number of sets (0 derives it from --tuples)");
  generate->add_option("--universe", g_universe, "set-family: universe size (default --tuples)");
  generate->add_option("--tuples", g_tuples, "set-family: |R|");
  generate->add_flag("--uniform", g_uniform, "set-family: equal set sizes instead of Zipf");
  generate->add_option("--vertices", g_vertices, "Digraphs: vertex count");
  generate->add_option("--edges", g_edges, "Digraphs: edge count");
  generate->add_option("--spike", g_spike, "adversarial-heavy: hub in/out degree (0 picks one above sqrt|D|)");
  generate->add_option("--widths", g_widths, "layered-path: comma-separated layer widths");
  generate->add_option("--density", g_density, "layered-path: edge probability")->capture_default_str();
  generate->add_option("--out", g_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      emit(a_out, analyze_query(aq.load(), aopt).dump(2) + "\n");
    } else if (*build) {
      auto q = bq.load();
      auto db = load_database(b_db);
      BuildOptions o;
      o.strategy = b_strategy;
      o.time_exponent = parse_rational(b_tau);
      if (!b_threshold.empty()) o.threshold = parse_rational(b_threshold);
      if (b_delta != 0) o.delta = b_delta;
      if (!b_decomp.empty()) o.decomposition = decomposition_from_json(read_json(b_decomp), hypergraph_of(q));
      o.grid_q = b_grid;
      o.jobs = b_jobs;
      auto s = BuiltStructure::build(q, db, o);
      auto summary = s.summary();
      if (summary.contains("warning")) std::cerr << "warning: " << summary["warning"].get<std::string>() << "\n";
      emit(b_out, s.to_json().dump() + "\n");
      std::cout << summary.dump(2) << "\n";
    } else if (*query) {
      auto db = load_database(q_db);
      auto s = BuiltStructure::from_json(read_json(q_structure), db, q_jobs);
      std::ifstream file;
      if (!q_requests.empty()) {
        file.open(q_requests);
        if (!file) throw IoError("cannot open " + q_requests);
      }
      std::istream& in = q_requests.empty() ? std::cin : file;
      std::ostringstream out;
      std::string line;
      while (std::getline(in, line)) {
        auto values = split_request(line);
        if (values.empty()) continue;
        CostMeter meter;
        bool yes = s.answer(values, meter);
        out << (yes ? "true" : "false");
        if (q_meter) out << '\t' << meter.steps();
        out << '\n';
        if (q_out.empty()) {
          std::cout << out.str() << std::flush;
          out.str("");
        }
      }
      if (!q_out.empty()) emit(q_out, out.str());
    } else if (*bench) {
      cfg.time_exponent = parse_rational(c_tau);
      for (const auto& t : c_thresholds) cfg.thresholds.push_back(parse_rational(t));
      cfg.seeds = c_seeds.empty() ? std::vector<std::uint64_t>{c_seed} : c_seeds;
      std::optional<Database> custom_db;
      if (cfg.family == "custom") {
        cfg.custom_query = cq.load();
        if (c_db.empty()) throw ValidationError("custom bench needs --db");
        custom_db = load_database(c_db);
        cfg.custom_db = &*custom_db;
      }
      auto rows = run_bench(cfg);
      emit(c_out, bench_csv(rows, cfg.timing));
      if (!c_plot.empty()) emit(c_plot, plot_json(rows, cfg).dump(2) + "\n");
      bool ok = true;
      for (const auto& r : rows) {
        if (!r.bound_ok) {
          ok = false;
          std::cerr << "bound exceeded: " << r.family << " " << r.strategy << " |D|=" << r.db_size
                    << " threshold=" << r.threshold << " space_constant=" << r.space_constant
                    << " time_constant=" << r.time_constant << "\n";
        }
      }
      if (!ok) return kExitBound;
    } else if (*generate) {
      Database db;
      if (g_family == "set-family") {
        db = set_family({g_sets, g_universe, g_tuples, !g_uniform}, g_seed);
      } else if (g_family == "random-digraph") {
        db = random_digraph(g_vertices, g_edges, g_seed);
      } else if (g_family == "adversarial-heavy") {
        db = adversarial_heavy(g_vertices, g_edges, g_spike, g_seed);
      } else {
        std::vector<std::uint64_t> widths;
        std::stringstream ss(g_widths);
        std::string w;
        while (std::getline(ss, w, ',')) {
          try {
            widths.push_back(std::stoull(w));
          } catch (const std::exception&) {
            throw ValidationError("bad layer width '" + w + "'");
          }
        }
        db = layered_path(widths, g_density, g_seed);
      }
      auto manifest = write_database(g_out, db);
      std::cout << manifest.string() << "\t|D|=" << db.total_size() << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
