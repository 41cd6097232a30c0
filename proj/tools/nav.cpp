// Command-line front end: ingest, index, query and serve a data directory.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nav/config.hpp"
#include "nav/engine.hpp"
#include "nav/error.hpp"
#include "nav/gateway.hpp"
#include "nav/synthetic.hpp"
#include "nav/user_store.hpp"

namespace fs = std::filesystem;

namespace {

nav::Gateway* g_gateway = nullptr;

void on_signal(int) {
  if (g_gateway) g_gateway->stop();
}

struct Options {
  std::string config_path;
  std::string data_dir;
  std::vector<std::string> overrides;
};

nav::Config load_config(const Options& o) {
  auto cfg = nav::Config::resolve(o.config_path.empty() ? std::nullopt : std::optional(o.config_path));
  for (const auto& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw nav::Error(nav::ErrorCode::Config, "--set expects key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string data_dir(const Options& o, const nav::Config& cfg) {
  return o.data_dir.empty() ? cfg.server.data_dir : o.data_dir;
}

void open_data(nav::Engine& engine, const std::string& dir) {
  if (fs::exists(fs::path(dir) / "documents.jsonl")) engine.load(dir);
}

int print(const nav::Response& r) {
  std::cout << r.body.dump(2) << '\n';
  return r.status < 400 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Literature discovery engine"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "key=value config file (overrides $NAV_CONFIG)");
  app.add_option("--data", opt.data_dir, "data directory (default: server.data_dir)");
  app.add_option("--set", opt.overrides, "override one config key, key=value");

  auto* ingest = app.add_subcommand("ingest", "ingest a JSONL file ('-' for stdin) and save the data directory");
  std::string ingest_file;
  ingest->add_option("file", ingest_file, "JSONL documents")->required();

  auto* index = app.add_subcommand("index", "re-embed and re-index every stored document");

  auto* search = app.add_subcommand("search", "run a query");
  std::string query, mode = "hybrid", granularity = "document";
  std::size_t k = 10;
  search->add_option("query", query)->required();
  search->add_option("--mode", mode, "keyword | vector | hybrid");
  search->add_option("--granularity", granularity, "document | chunk | sentence");
  search->add_option("-k", k, "number of results");

  auto* experts = app.add_subcommand("experts", "rank authors for a topic");
  experts->add_option("query", query)->required();
  experts->add_option("-k", k, "number of experts");

  auto* recommend = app.add_subcommand("recommend", "recommendations for a user's tags");
  std::string user;
  recommend->add_option("--user", user)->required();

  auto* stats = app.add_subcommand("stats", "knowledge graph and corpus statistics");
  auto* status = app.add_subcommand("status", "pipeline tickets of the last run");

  auto* serve = app.add_subcommand("serve", "serve the /v1 HTTP API");
  std::optional<int> port;
  std::optional<std::string> host;
  serve->add_option("--port", port);
  serve->add_option("--host", host);

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus as JSONL");
  std::string synth_out;
  nav::SyntheticParams sp;
  synth->add_option("--out", synth_out, "output file ('-' for stdout)")->required();
  synth->add_option("--documents", sp.documents);
  synth->add_option("--seed", sp.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    nav::Config cfg = load_config(opt);
    const std::string dir = data_dir(opt, cfg);

    if (*synth) {
      sp.today = cfg.reference_date();
      std::ifstream in(cfg.concepts.gazetteer.empty() ? nav::source_path("fixtures/gazetteer.tsv")
                                                      : cfg.concepts.gazetteer);
      if (!in) throw nav::Error(nav::ErrorCode::Io, "cannot open gazetteer");
      const auto docs = nav::synthesize_corpus(nav::read_gazetteer(in), sp);
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (synth_out != "-") {
        file.open(synth_out);
        if (!file) throw nav::Error(nav::ErrorCode::Io, "cannot write " + synth_out);
        out = &file;
      }
      for (const auto& d : docs) *out << nav::to_json(d).dump() << '\n';
      std::cerr << "wrote " << docs.size() << " documents\n";
      return 0;
    }

    nav::Engine engine(cfg);
    open_data(engine, dir);

    if (*ingest) {
      std::ifstream file;
      std::istream* in = &std::cin;
      if (ingest_file != "-") {
        file.open(ingest_file);
        if (!file) throw nav::Error(nav::ErrorCode::Io, "cannot open " + ingest_file);
        in = &file;
      }
      std::size_t accepted = 0, rejected = 0;
      for (const auto& r : engine.ingest(*in)) {
        if (r.accepted) {
          ++accepted;
        } else {
          ++rejected;
          std::cerr << "line " << r.line << ": " << r.reason << '\n';
        }
      }
      engine.save(dir);
      std::size_t dead = 0;
      for (const auto& t : engine.pipeline().tickets()) dead += t.status == nav::TicketStatus::dead_letter;
      std::cout << "accepted " << accepted << ", rejected " << rejected << ", dead letters " << dead << '\n';
      return rejected || dead ? 1 : 0;
    }
    if (*index) {
      engine.rebuild_indices();
      engine.save(dir);
      std::cout << "indexed " << engine.documents().size() << " documents\n";
      return 0;
    }
    if (*status) {
      std::ifstream in(fs::path(dir) / "tickets.jsonl");
      if (!in) throw nav::Error(nav::ErrorCode::Io, "no tickets in " + dir);
      std::map<std::string, std::size_t> counts;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t = nav::Json::parse(line);
        ++counts[t.value("status", "unknown")];
        if (t.value("status", "") != "complete") std::cout << line << '\n';
      }
      for (const auto& [s, n] : counts) std::cout << s << ' ' << n << '\n';
      return 0;
    }

    nav::UserStore users((fs::path(dir) / "users").string());
    nav::Gateway gateway(engine, users);

    if (*search) {
      nav::Request r;
      r.path = "/v1/search";
      r.query = {{"q", query}, {"mode", mode}, {"granularity", granularity}, {"k", std::to_string(k)}};
      return print(gateway.handle(r));
    }
    if (*experts) {
      nav::Request r;
      r.path = "/v1/experts";
      r.query = {{"q", query}, {"k", std::to_string(k)}};
      return print(gateway.handle(r));
    }
    if (*recommend) {
      nav::Request r;
      r.path = "/v1/recommendations";
      r.query = {{"user", user}};
      return print(gateway.handle(r));
    }
    if (*stats) return print(gateway.handle(nav::Request::get("/v1/kg/stats")));
    if (*serve) {
      const std::string h = host.value_or(cfg.server.host);
      const int bound = gateway.bind(h, port.value_or(cfg.server.port));
      if (bound < 0) throw nav::Error(nav::ErrorCode::Io, "cannot bind " + h);
      std::cout << "listening on http://" << h << ':' << bound << std::endl;
      g_gateway = &gateway;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      gateway.listen();
      g_gateway = nullptr;
      users.compact();
      return 0;
    }
  } catch (const nav::Error& e) {
    std::cerr << "nav: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nav: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
