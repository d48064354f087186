// recap: batch front end for the meeting recap pipeline.
//
//   recap process <file> [--format] [--view] [--out] [--backend] [--config]
//   recap bench-seg <corpus-dir> [--out table|json]
//   recap replay <doc.json> <events.jsonl> [--view] [--out]
//   recap serve [--config] [--host] [--port]
//
// stdout carries only the requested artifact; diagnostics go to stderr.

#include <charconv>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "recap/backend.hpp"
#include "recap/config.hpp"
#include "recap/error.hpp"
#include "recap/feedback.hpp"
#include "recap/log.hpp"
#include "recap/pipeline.hpp"
#include "recap/recapdoc.hpp"
#include "recap/segmentation.hpp"
#include "recap/service/http_server.hpp"
#include "recap/service/service.hpp"
#include "recap/service/store.hpp"
#include "recap/text.hpp"
#include "recap/transcript.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;
constexpr int kExitEmpty = 4;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in || fs::is_directory(p)) throw InputError(fmt::format("cannot read {}", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

recap::AppConfig load_app_config(const std::string& path) {
  auto cfg = path.empty() ? recap::AppConfig{} : recap::load_config(path);
  recap::apply_environment(cfg);
  return cfg;
}

void emit(const std::string& artifact) {
  std::cout << artifact;
  if (!artifact.empty() && artifact.back() != '\n') std::cout << '\n';
  std::cout.flush();
}

std::string render(const recap::RecapDocument& doc, recap::View view, const std::string& out) {
  if (out == "markdown") return recap::render_markdown(doc, view);
  return recap::project(doc, view).dump();
}

// ---------------------------------------------------------------------------
// process

struct ProcessArgs {
  std::string file;
  std::string format;
  std::string view = "both";
  std::string out = "json";
  std::string backend;
  std::string config;
  std::optional<std::int64_t> created_at;
};

int run_process(const ProcessArgs& a) {
  auto cfg = load_app_config(a.config);
  if (!a.backend.empty()) cfg.backend = recap::backend_kind_from_string(a.backend);
  const auto raw = read_file(a.file);
  recap::ParseOptions opts;
  if (!a.format.empty()) opts.format_hint = recap::source_format_from_string(a.format);
  const auto t = recap::parse_transcript(raw, opts);
  const auto view = recap::view_from_string(a.view);

  std::shared_ptr<recap::RequestJournal> journal;
  if (cfg.journal_path) journal = recap::make_journal(cfg);
  auto backend = recap::make_backend(cfg, journal);
  const std::int64_t created_at =
      a.created_at.value_or(cfg.backend == recap::BackendKind::kStub ? 0 : recap::now_ms());
  const auto doc = recap::run_pipeline(t, *backend, cfg.pipeline, created_at);
  emit(render(doc, view, a.out));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench-seg

struct BenchRow {
  std::string name;
  std::size_t utterances = 0;
  std::size_t gold_segments = 0;
  std::size_t predicted_segments = 0;
  recap::SegmentationMetrics metrics;
};

std::vector<std::size_t> read_gold(const fs::path& p, std::size_t n) {
  std::vector<std::size_t> starts;
  std::istringstream in(read_file(p));
  std::string tok;
  while (in >> tok) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw InputError(fmt::format("{}: '{}' is not a boundary index", p.string(), tok));
    }
    starts.push_back(v);
  }
  if (starts.empty() || starts.front() != 0) starts.insert(starts.begin(), 0);
  try {
    recap::SegmentList::from_boundaries(starts, n);
  } catch (const recap::Error& e) {
    throw InputError(fmt::format("{}: {}", p.string(), e.what()));
  }
  return starts;
}

int run_bench(const std::string& dir, const std::string& out, const std::string& config) {
  const auto cfg = load_app_config(config);
  if (!fs::is_directory(dir)) throw InputError(fmt::format("{} is not a directory", dir));
  std::vector<fs::path> transcripts;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") transcripts.push_back(e.path());
  }
  std::sort(transcripts.begin(), transcripts.end());
  if (transcripts.empty()) throw InputError(fmt::format("{} has no .txt transcripts", dir));

  std::vector<BenchRow> rows;
  for (const auto& path : transcripts) {
    auto gold_path = path;
    gold_path.replace_extension(".gold");
    if (!fs::exists(gold_path)) {
      throw InputError(fmt::format("{} has no gold file {}", path.string(), gold_path.string()));
    }
    recap::Transcript t;
    try {
      t = recap::parse_transcript(read_file(path));
    } catch (const recap::Error& e) {
      throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
    const auto gold = recap::SegmentList::from_boundaries(read_gold(gold_path, t.size()), t.size());
    recap::LexicalCohesionScorer scorer(cfg.pipeline.cohesion_block);
    const auto predicted = recap::segment_transcript(t, scorer, cfg.pipeline.segmentation);
    rows.push_back({path.stem().string(), t.size(), gold.size(), predicted.size(),
                    recap::evaluate_segmentation(predicted, gold)});
  }

  double pk = 0.0;
  double wd = 0.0;
  for (const auto& r : rows) {
    pk += r.metrics.pk;
    wd += r.metrics.window_diff;
  }
  pk /= static_cast<double>(rows.size());
  wd /= static_cast<double>(rows.size());

  if (out == "json") {
    json files = json::array();
    for (const auto& r : rows) {
      files.push_back({{"name", r.name},
                       {"utterances", r.utterances},
                       {"gold_segments", r.gold_segments},
                       {"predicted_segments", r.predicted_segments},
                       {"k", r.metrics.k},
                       {"pk", r.metrics.pk},
                       {"window_diff", r.metrics.window_diff}});
    }
    emit(json{{"files", files}, {"mean", {{"pk", pk}, {"window_diff", wd}}}}.dump());
    return kExitOk;
  }
  std::string table = fmt::format("{:<32} {:>6} {:>5} {:>5} {:>8} {:>8}\n", "file", "n",
                                  "gold", "pred", "pk", "wd");
  for (const auto& r : rows) {
    table += fmt::format("{:<32} {:>6} {:>5} {:>5} {:>8.4f} {:>8.4f}\n", r.name, r.utterances,
                         r.gold_segments, r.predicted_segments, r.metrics.pk,
                         r.metrics.window_diff);
  }
  table += fmt::format("{:<32} {:>6} {:>5} {:>5} {:>8.4f} {:>8.4f}\n", "mean", "", "", "", pk, wd);
  emit(table);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// replay

int run_replay(const std::string& doc_path, const std::string& events_path,
               const std::string& view, const std::string& out) {
  recap::RecapDocument doc;
  try {
    doc = recap::from_portable(read_file(doc_path));
  } catch (const recap::SchemaViolation& e) {
    throw InputError(fmt::format("{}: {}", doc_path, e.what()));
  }
  std::istringstream in(read_file(events_path));
  const auto events = recap::read_event_lines(in);
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      doc = recap::apply(doc, events[i]);
    } catch (const recap::Error& e) {
      throw InputError(fmt::format("event {} ({}): {}", i, events[i].event_id, e.what()));
    }
  }
  if (view == "both" && out == "json") {
    emit(recap::to_portable(doc));
  } else {
    emit(render(doc, recap::view_from_string(view), out));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

int run_serve(const std::string& config, const std::string& host, int port) {
  auto cfg = load_app_config(config);
  if (!host.empty()) cfg.listen_host = host;
  if (port >= 0) cfg.listen_port = port;

  std::shared_ptr<recap::service::MeetingStore> store;
  if (cfg.data_dir.empty()) {
    store = std::make_shared<recap::service::InMemoryStore>();
  } else {
    store = std::make_shared<recap::service::FileStore>(cfg.data_dir);
  }
  std::shared_ptr<recap::RequestJournal> journal;
  if (cfg.journal_path) journal = recap::make_journal(cfg);
  std::shared_ptr<recap::Backend> backend = recap::make_backend(cfg, journal);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  recap::service::Service svc(cfg, store, backend);
  recap::service::HttpServer server(svc, recap::service::service_token_from_env(cfg));
  const int bound = server.start(cfg.listen_host, cfg.listen_port);
  recap::logger().info("listening on {}:{} ({} store, {} backend)", cfg.listen_host, bound,
                       cfg.data_dir.empty() ? "memory" : "file",
                       recap::to_string(cfg.backend));
  int sig = 0;
  sigwait(&signals, &sig);
  recap::logger().info("signal {} received, shutting down", sig);
  server.stop();
  svc.wait_idle();
  return kExitOk;
}

int exit_code_for(const recap::Error& e) {
  switch (e.code()) {
    case recap::ErrorCode::kEmptyTranscript: return kExitEmpty;
    case recap::ErrorCode::kBackendFailure: return kExitBackend;
    default: return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meeting recap pipeline: highlights and hierarchical recaps from transcripts"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging on stderr");

  ProcessArgs pa;
  auto* process = app.add_subcommand("process", "Recap one transcript file");
  process->add_option("file", pa.file, "Transcript file")->required();
  process->add_option("--format", pa.format, "Input format")
      ->check(CLI::IsMember({"plain", "srt", "vtt"}));
  process->add_option("--view", pa.view, "Recap view")
      ->check(CLI::IsMember({"highlights", "hierarchical", "both"}));
  process->add_option("--out", pa.out, "Output format")->check(CLI::IsMember({"json", "markdown"}));
  process->add_option("--backend", pa.backend, "Model backend (default from config, else stub)")
      ->check(CLI::IsMember({"stub", "http"}));
  process->add_option("--config", pa.config, "JSON config file");
  process->add_option("--created-at", pa.created_at, "created_at_ms stamped on the document");

  std::string corpus, bench_out = "table", bench_config;
  auto* bench = app.add_subcommand("bench-seg", "Pk/WindowDiff of the lexical segmenter");
  bench->add_option("corpus-dir", corpus, "Directory of <name>.txt + <name>.gold pairs")->required();
  bench->add_option("--out", bench_out, "Output format")->check(CLI::IsMember({"table", "json"}));
  bench->add_option("--config", bench_config, "JSON config file");

  std::string doc_path, events_path, replay_view = "both", replay_out = "json";
  auto* replay = app.add_subcommand("replay", "Fold an event log over a recap document");
  replay->add_option("doc", doc_path, "Recap document (JSON)")->required();
  replay->add_option("events", events_path, "Event log (one JSON event per line)")->required();
  replay->add_option("--view", replay_view, "Recap view")
      ->check(CLI::IsMember({"highlights", "hierarchical", "both"}));
  replay->add_option("--out", replay_out, "Output format")
      ->check(CLI::IsMember({"json", "markdown"}));

  std::string serve_config, serve_host;
  int serve_port = -1;
  auto* serve = app.add_subcommand("serve", "Run the /v1 HTTP service");
  serve->add_option("--config", serve_config, "JSON config file");
  serve->add_option("--host", serve_host, "Listen address");
  serve->add_option("--port", serve_port, "Listen port (0 picks a free one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  recap::logger().set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
  if (*serve && !verbose) recap::logger().set_level(spdlog::level::info);

  try {
    if (*process) return run_process(pa);
    if (*bench) return run_bench(corpus, bench_out, bench_config);
    if (*replay) return run_replay(doc_path, events_path, replay_view, replay_out);
    if (*serve) return run_serve(serve_config, serve_host, serve_port);
  } catch (const InputError& e) {
    std::cerr << "recap: " << e.what() << '\n';
    return kExitInput;
  } catch (const recap::Error& e) {
    std::cerr << "recap: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "recap: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}
