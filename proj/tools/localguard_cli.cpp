#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "localguard/bundle.hpp"
#include "localguard/config.hpp"
#include "localguard/corpus.hpp"
#include "localguard/embedder.hpp"
#include "localguard/eval.hpp"
#include "localguard/guard.hpp"
#include "localguard/labeller.hpp"
#include "localguard/llm_client.hpp"
#include "localguard/util.hpp"

using namespace localguard;

namespace {

std::shared_ptr<const Embedder> make_embedder(const AppConfig& cfg, const std::string& store_override,
                                              size_t dim_hint) {
  const std::string store = store_override.empty() ? cfg.store_path : store_override;
  if (!store.empty()) {
    auto s = std::make_shared<const EmbeddingStore>(EmbeddingStore::open(store));
    return std::make_shared<StoreEmbedder>(std::move(s));
  }
  if (cfg.embedding.url.empty()) {
    throw std::runtime_error("no embedding source: set embedding.store or embedding.url, or pass --store");
  }
  const size_t dim = cfg.embedding_dim ? cfg.embedding_dim : dim_hint;
  if (dim == 0) throw std::runtime_error("embedding.dim is required for a remote embedder");
  return std::make_shared<RemoteEmbedder>(cfg.embedding, dim);
}

std::optional<Split> split_option(const std::string& name) {
  if (name.empty() || name == "all") return std::nullopt;
  const auto s = parse_split(name);
  if (!s) throw std::runtime_error("unknown split " + name);
  return s;
}

void print_report(const EvalReport& report, const std::string& csv, const std::string& md) {
  if (!csv.empty()) write_file(csv, report.to_csv());
  if (!md.empty()) write_file(md, report.to_markdown());
  std::cout << report.to_markdown();
}

void print_results(const std::vector<ModerationResult>& results) {
  for (const auto& r : results) std::cout << to_json(r).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"localguard: localized content-moderation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  auto load = [&] { return config_path.empty() ? AppConfig{} : load_config(config_path); };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a JSONL corpus dump");
  std::string in_path, out_path, rejects_path, source_name_opt = "other";
  ingest->add_option("--input", in_path)->required();
  ingest->add_option("--out", out_path)->required();
  ingest->add_option("--rejects", rejects_path);
  ingest->add_option("--source", source_name_opt, "default source: forum_a, forum_b or other");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw the keyword-stratified labelling pool");
  std::string lexicon_path;
  size_t n_flagged = 0, n_random = 0;
  uint64_t seed = 0;
  bool seed_set = false;
  sample->add_option("--records", in_path)->required();
  sample->add_option("--out", out_path)->required();
  sample->add_option("--lexicon", lexicon_path);
  sample->add_option("--n-flagged", n_flagged);
  sample->add_option("--n-random", n_random);
  sample->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });

  // split
  auto* split = app.add_subcommand("split", "Assign records to train/valid/test by thread");
  split->add_option("--records", in_path)->required();
  split->add_option("--out", out_path)->required();
  split->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });

  // label
  auto* label = app.add_subcommand("label", "Label records with the configured LLM ensemble");
  std::string failures_path;
  label->add_option("--records", in_path)->required();
  label->add_option("--out", out_path)->required();
  label->add_option("--failures", failures_path);

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "Combine verdicts into ensemble labels");
  std::string policy_name_opt;
  aggregate->add_option("--verdicts", in_path)->required();
  aggregate->add_option("--out", out_path)->required();
  aggregate->add_option("--policy", policy_name_opt, "consensus or majority");

  // compile
  auto* compile = app.add_subcommand("compile", "Join labels, records and splits into a dataset");
  std::string records_path, split_path, stats_path;
  compile->add_option("--ensemble", in_path)->required();
  compile->add_option("--records", records_path)->required();
  compile->add_option("--split", split_path)->required();
  compile->add_option("--out", out_path)->required();
  compile->add_option("--stats", stats_path, "markdown statistics table");

  // embed
  auto* embed = app.add_subcommand("embed", "Fetch embeddings and write a store");
  embed->add_option("--records", in_path)->required();
  embed->add_option("--out", out_path)->required();

  // train
  auto* train = app.add_subcommand("train", "Train the eight classifier heads");
  std::string dataset_path, store_path, kind_opt;
  train->add_option("--dataset", dataset_path)->required();
  train->add_option("--store", store_path);
  train->add_option("--out", out_path)->required();
  train->add_option("--kind", kind_opt, "ridge or nn");

  // eval
  auto* eval = app.add_subcommand("eval", "PR-AUC of a bundle's heads on a dataset split");
  std::string bundle_path, split_name_opt = "test", csv_path, md_path;
  eval->add_option("--dataset", dataset_path)->required();
  eval->add_option("--bundle", bundle_path)->required();
  eval->add_option("--store", store_path);
  eval->add_option("--split", split_name_opt, "train, valid, test or all");
  eval->add_option("--csv", csv_path);
  eval->add_option("--md", md_path);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Compare the bundle with external moderation providers");
  bool offline = false;
  bench->add_option("--dataset", dataset_path)->required();
  bench->add_option("--bundle", bundle_path)->required();
  bench->add_option("--store", store_path);
  bench->add_option("--split", split_name_opt, "train, valid, test or all");
  bench->add_option("--csv", csv_path);
  bench->add_option("--md", md_path);
  bench->add_flag("--offline", offline, "serve provider scores from the cache only");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the moderation HTTP service");
  std::string host;
  int port = -1;
  serve->add_option("--bundle", bundle_path);
  serve->add_option("--store", store_path);
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  // moderate
  auto* mod = app.add_subcommand("moderate", "Moderate texts from the command line");
  std::vector<std::string> texts;
  std::string file_path;
  mod->add_option("--bundle", bundle_path);
  mod->add_option("--store", store_path);
  auto* text_opt = mod->add_option("--text", texts, "text to moderate (repeatable)");
  auto* file_opt = mod->add_option("--file", file_path, "one text per line")->check(CLI::ExistingFile);
  text_opt->excludes(file_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    AppConfig cfg = load();

    if (*ingest) {
      const auto src = parse_source(source_name_opt);
      if (!src) throw std::runtime_error("unknown source " + source_name_opt);
      auto result = ingest_records(in_path, *src);
      write_records(out_path, result.records);
      if (!rejects_path.empty()) write_rejects(rejects_path, result.rejects);
      std::cerr << "ingested " << result.records.size() << " records, " << result.rejects.size()
                << " rejects, " << result.duplicate_ids.size() << " duplicates\n";
      return 0;
    }

    if (*sample) {
      auto records = ingest_records(in_path, Source::kOther).records;
      const std::string lex = lexicon_path.empty() ? cfg.lexicon_path : lexicon_path;
      const KeywordLexicon lexicon = lex.empty() ? KeywordLexicon::builtin() : KeywordLexicon::load(lex);
      const size_t nf = n_flagged ? n_flagged : cfg.n_flagged;
      const size_t nr = n_random ? n_random : cfg.n_random;
      auto pool = sample_pool(records, lexicon, nf, nr, seed_set ? seed : cfg.sample_seed);
      write_records(out_path, pool);
      std::cerr << "sampled " << pool.size() << " records\n";
      return 0;
    }

    if (*split) {
      auto records = ingest_records(in_path, Source::kOther).records;
      auto assignment = split_by_thread(records, cfg.split, seed_set ? seed : cfg.split_seed);
      for (const auto& w : assignment.warnings) std::cerr << "warning: " << w << '\n';
      write_split(out_path, assignment);
      const auto counts = assignment.counts();
      std::cerr << "train " << counts[0] << ", valid " << counts[1] << ", test " << counts[2] << '\n';
      return 0;
    }

    if (*label) {
      if (cfg.llm.size() < 2) throw std::runtime_error("llm.providers must list at least two models");
      auto records = ingest_records(in_path, Source::kOther).records;
      std::vector<std::shared_ptr<LlmClient>> models;
      for (const auto& e : cfg.llm) models.push_back(std::make_shared<HttpLlmClient>(e));
      auto run = label_records(records, models, cfg.label);
      write_verdict_log(out_path, run.verdicts);
      if (!failures_path.empty()) {
        std::ofstream f(failures_path);
        for (const auto& fl : run.failures) {
          f << nlohmann::json{{"record_id", fl.record_id}, {"model_id", fl.model_id}, {"reason", fl.reason}}.dump()
            << '\n';
        }
      }
      std::cerr << run.verdicts.size() << " verdicts, " << run.failures.size() << " failures\n";
      return 0;
    }

    if (*aggregate) {
      Policy policy = cfg.policy;
      if (!policy_name_opt.empty()) {
        const auto p = parse_policy(policy_name_opt);
        if (!p) throw std::runtime_error("unknown policy " + policy_name_opt);
        policy = *p;
      }
      auto run = aggregate_all(read_verdict_log(in_path), policy);
      write_ensemble(out_path, run.ensemble);
      std::cerr << run.ensemble.size() << " labelled, " << run.unlabelled.size() << " unlabelled\n";
      return 0;
    }

    if (*compile) {
      auto ensemble = read_ensemble(in_path);
      auto records = ingest_records(records_path, Source::kOther).records;
      auto assignment = read_split(split_path);
      auto compiled = compile_dataset(ensemble, records, assignment);
      save_dataset(out_path, compiled.dataset);
      const std::string table = compiled.stats.to_markdown();
      if (!stats_path.empty()) write_file(stats_path, table);
      std::cout << table;
      return 0;
    }

    if (*embed) {
      if (cfg.embedding.url.empty()) throw std::runtime_error("embedding.url is not configured");
      if (cfg.embedding_dim == 0) throw std::runtime_error("embedding.dim is not configured");
      auto records = ingest_records(in_path, Source::kOther).records;
      RemoteEmbedder embedder(cfg.embedding, cfg.embedding_dim);
      std::vector<EmbedItem> items;
      for (const auto& r : records) items.push_back({r.id, r.text});
      auto outcomes = embedder.embed(items);
      std::vector<std::string> ids;
      std::vector<EmbeddingVector> vectors;
      size_t failed = 0;
      for (size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].vector) {
          ++failed;
          std::cerr << "embed failed for " << items[i].id << ": " << outcomes[i].error << '\n';
          continue;
        }
        ids.push_back(items[i].id);
        vectors.push_back(std::move(*outcomes[i].vector));
      }
      EmbeddingStore::save(out_path, ids, vectors, false);
      std::cerr << "stored " << ids.size() << " vectors, " << failed << " failures\n";
      return failed == 0 ? 0 : 2;
    }

    if (*train) {
      auto dataset = load_dataset(dataset_path);
      auto embedder = make_embedder(cfg, store_path, 0);
      TrainOptions options = cfg.train;
      if (kind_opt == "nn") options.kind = HeadKind::kNeural;
      if (kind_opt == "ridge") options.kind = HeadKind::kRidge;
      EmbeddingSpec spec{embedder->dim(), true,
                         store_path.empty() && cfg.store_path.empty() ? "remote:" + cfg.embedding.url
                                                                      : "store"};
      TrainReport report;
      auto bundle = train_bundle(dataset, *embedder, spec, options, &report);
      bundle.save(out_path);
      for (const auto& h : report.heads) {
        std::cerr << h.target.name() << ": " << h.n_train << " rows, " << h.n_pos << " positive"
                  << (h.calibrated ? ", calibrated" : "") << '\n';
      }
      if (report.missing_embeddings) std::cerr << report.missing_embeddings << " rows had no embedding\n";
      return 0;
    }

    if (*eval || *bench) {
      auto dataset = load_dataset(dataset_path);
      auto bundle = ModelBundle::load(bundle_path);
      auto embedder = make_embedder(cfg, store_path, bundle.embedding.dim);
      auto records = eval_records(dataset, split_option(split_name_opt));
      auto vectors = embed_records(records, *embedder, bundle.embedding.normalized);
      std::vector<std::shared_ptr<ProviderClient>> providers;
      ProviderMapping mapping = cfg.mapping_path.empty() ? ProviderMapping::builtin()
                                                         : ProviderMapping::load(cfg.mapping_path);
      if (*bench) {
        if (offline && cfg.provider_cache.empty()) throw std::runtime_error("--offline needs benchmark.cache");
        if (!cfg.provider_cache.empty()) std::filesystem::create_directories(cfg.provider_cache);
        for (const auto& p : cfg.providers) {
          std::shared_ptr<ProviderCache> cache;
          if (!cfg.provider_cache.empty()) {
            const auto file = std::filesystem::path(cfg.provider_cache) / (std::string(provider_name(p.provider)) + ".jsonl");
            cache = std::make_shared<ProviderCache>(file.string());
          }
          std::shared_ptr<ProviderClient> live = offline ? nullptr : make_http_provider(p);
          if (cache) {
            providers.push_back(std::make_shared<CachedProvider>(p.provider, p.name, cache, live));
          } else {
            providers.push_back(live);
          }
        }
      }
      auto report = benchmark_report(bundle, "bundle-" + bundle.version, records, vectors, providers, mapping,
                                     cfg.benchmark_max_in_flight);
      print_report(report, csv_path, md_path);
      return 0;
    }

    if (*serve) {
      ServiceConfig sc = cfg.service;
      if (!bundle_path.empty()) sc.bundle_path = bundle_path;
      if (!store_path.empty()) sc.store_path = store_path;
      if (!host.empty()) sc.host = host;
      if (port >= 0) sc.port = port;
      if (sc.bundle_path.empty()) throw std::runtime_error("no bundle: set service.bundle or pass --bundle");
      auto bundle = std::make_shared<const ModelBundle>(ModelBundle::load(sc.bundle_path));
      auto embedder = make_embedder(cfg, sc.store_path, bundle->embedding.dim);

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      ModerationService service(bundle, embedder, sc);
      const int bound = service.bind();
      std::cerr << "serving model " << bundle->version << " on " << sc.host << ':' << bound << '\n';
      std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        std::cerr << "signal " << sig << ", shutting down\n";
        service.stop();
      });
      service.listen();
      pthread_kill(waiter.native_handle(), SIGTERM);
      waiter.join();
      return 0;
    }

    if (*mod) {
      ServiceConfig sc = cfg.service;
      if (!bundle_path.empty()) sc.bundle_path = bundle_path;
      if (sc.bundle_path.empty()) throw std::runtime_error("no bundle: set service.bundle or pass --bundle");
      sc.validate();
      auto bundle = ModelBundle::load(sc.bundle_path);
      auto embedder = make_embedder(cfg, store_path, bundle.embedding.dim);
      if (!file_path.empty()) {
        for (auto& line : read_lines(file_path)) {
          if (!trim(line).empty()) texts.push_back(line);
        }
      }
      if (texts.empty()) throw std::runtime_error("nothing to moderate: pass --text or --file");
      print_results(moderate(texts, bundle, *embedder, sc.thresholds));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
