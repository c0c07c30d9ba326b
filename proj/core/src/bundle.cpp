#include "localguard/bundle.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <filesystem>

#include "localguard/util.hpp"

namespace localguard {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void put_f32(std::string& out, float x) {
  const auto v = std::bit_cast<uint32_t>(x);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class F32Reader {
 public:
  F32Reader(const std::string& data, std::string name) : data_(data), name_(std::move(name)) {}

  float next() {
    if (pos_ + 4 > data_.size()) throw BundleError(name_ + ": weight file is too short");
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += 4;
    const uint32_t v = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                       (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(v);
  }

  std::vector<float> take(size_t n) {
    std::vector<float> out(n);
    for (auto& x : out) x = next();
    return out;
  }

  void expect_end() const {
    if (pos_ != data_.size()) throw BundleError(name_ + ": weight file has trailing bytes");
  }

 private:
  const std::string& data_;
  std::string name_;
  size_t pos_ = 0;
};

std::string encode_head(const Head& h) {
  std::string out;
  if (h.kind == HeadKind::kRidge) {
    for (float w : h.weights) put_f32(out, w);
    put_f32(out, h.bias);
  } else {
    for (float w : h.w1) put_f32(out, w);
    for (float w : h.b1) put_f32(out, w);
    for (float w : h.w2) put_f32(out, w);
    put_f32(out, h.b2);
  }
  return out;
}

bool all_finite(const std::vector<float>& v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::vector<float> to_f32(const Vector& v) {
  std::vector<float> out(static_cast<size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

}  // namespace

std::string_view head_kind_name(HeadKind k) { return k == HeadKind::kRidge ? "ridge" : "nn"; }

std::string_view calibration_name(Calibration c) {
  return c == Calibration::kRaw ? "raw" : "sigmoid";
}

size_t Head::dim() const {
  if (kind == HeadKind::kRidge) return weights.size();
  return hidden ? w1.size() / hidden : 0;
}

double Head::raw_score(std::span<const float> x) const {
  const size_t d = dim();
  if (x.size() != d) {
    throw std::invalid_argument(target.name() + " head: input dim " + std::to_string(x.size()) +
                                " != " + std::to_string(d));
  }
  if (kind == HeadKind::kRidge) {
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) acc += static_cast<double>(weights[j]) * x[j];
    return acc + bias;
  }
  double z = b2;
  for (size_t k = 0; k < hidden; ++k) {
    double h = b1[k];
    const float* row = w1.data() + k * d;
    for (size_t j = 0; j < d; ++j) h += static_cast<double>(row[j]) * x[j];
    if (h > 0.0) z += static_cast<double>(w2[k]) * h;
  }
  return sigmoid(z);
}

double Head::calibrate(double raw) const {
  return calibration == Calibration::kSigmoid ? platt.apply(raw) : raw;
}

double Head::score(std::span<const float> x) const { return calibrate(raw_score(x)); }

Head Head::from_ridge(const RidgeModel& model, const Target& target) {
  Head h;
  h.target = target;
  h.kind = HeadKind::kRidge;
  h.weights = to_f32(model.weights);
  h.bias = static_cast<float>(model.bias);
  h.threshold = 0.0;
  return h;
}

Head Head::from_neural(const NeuralModel& model, const Target& target) {
  Head h;
  h.target = target;
  h.kind = HeadKind::kNeural;
  h.hidden = model.hidden();
  const size_t d = model.dim();
  h.w1.resize(h.hidden * d);
  for (size_t k = 0; k < h.hidden; ++k) {
    for (size_t j = 0; j < d; ++j) {
      h.w1[k * d + j] = static_cast<float>(model.w1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
    }
  }
  h.b1 = to_f32(model.b1);
  h.w2 = to_f32(model.w2);
  h.b2 = static_cast<float>(model.b2);
  h.threshold = 0.5;
  return h;
}

const Head& ModelBundle::head(const Target& target) const {
  for (const auto& h : heads) {
    if (h.target == target) return h;
  }
  throw BundleError("bundle has no " + target.name() + " head");
}

Head& ModelBundle::head(const Target& target) {
  return const_cast<Head&>(static_cast<const ModelBundle&>(*this).head(target));
}

void ModelBundle::check() const {
  for (const auto& t : all_targets()) {
    const Head& h = head(t);
    if (h.dim() != embedding.dim) {
      throw BundleError(t.name() + " head dim " + std::to_string(h.dim()) +
                        " != embedding dim " + std::to_string(embedding.dim));
    }
    if (h.kind == HeadKind::kNeural &&
        (h.b1.size() != h.hidden || h.w2.size() != h.hidden || h.w1.size() != h.hidden * embedding.dim)) {
      throw BundleError(t.name() + " head: inconsistent layer sizes");
    }
    if (!all_finite(h.weights) || !all_finite(h.w1) || !all_finite(h.b1) || !all_finite(h.w2) ||
        !std::isfinite(h.bias) || !std::isfinite(h.b2)) {
      throw BundleError(t.name() + " head has non-finite parameters");
    }
  }
}

void ModelBundle::save(const std::string& dir) const {
  check();
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = version;
  manifest["dim"] = embedding.dim;
  manifest["normalized"] = embedding.normalized;
  manifest["embedding_source"] = embedding.source;
  manifest["heads"] = json::array();
  for (const auto& h : heads) {
    const std::string file = h.target.name() + ".bin";
    const std::string bytes = encode_head(h);
    write_file((fs::path(dir) / file).string(), bytes);
    json entry = {{"target", h.target.name()},
                  {"kind", head_kind_name(h.kind)},
                  {"calibration", calibration_name(h.calibration)},
                  {"threshold", h.threshold},
                  {"file", file},
                  {"sha256", sha256_hex(bytes)}};
    if (h.calibration == Calibration::kSigmoid) {
      entry["platt"] = {{"slope", h.platt.slope}, {"intercept", h.platt.intercept}};
    }
    if (h.kind == HeadKind::kNeural) entry["hidden"] = h.hidden;
    manifest["heads"].push_back(entry);
  }
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

ModelBundle ModelBundle::load(const std::string& dir) {
  const auto manifest_path = (fs::path(dir) / "manifest.json").string();
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw BundleError(manifest_path + ": " + e.what());
  }

  ModelBundle b;
  try {
    b.version = manifest.at("version").get<std::string>();
    b.embedding.dim = manifest.at("dim").get<size_t>();
    b.embedding.normalized = manifest.at("normalized").get<bool>();
    b.embedding.source = manifest.value("embedding_source", "");
    for (const auto& entry : manifest.at("heads")) {
      Head h;
      const auto target = Target::parse(entry.at("target").get<std::string>());
      if (!target) throw BundleError("unknown head target " + entry.at("target").dump());
      h.target = *target;
      const std::string kind = entry.at("kind").get<std::string>();
      if (kind == "ridge") {
        h.kind = HeadKind::kRidge;
      } else if (kind == "nn") {
        h.kind = HeadKind::kNeural;
      } else {
        throw BundleError("unknown head kind " + kind);
      }
      const std::string cal = entry.at("calibration").get<std::string>();
      if (cal == "raw") {
        h.calibration = Calibration::kRaw;
      } else if (cal == "sigmoid") {
        h.calibration = Calibration::kSigmoid;
        h.platt.slope = entry.at("platt").at("slope").get<double>();
        h.platt.intercept = entry.at("platt").at("intercept").get<double>();
      } else {
        throw BundleError("unknown calibration " + cal);
      }
      h.threshold = entry.at("threshold").get<double>();

      const std::string file = entry.at("file").get<std::string>();
      const std::string bytes = read_file((fs::path(dir) / file).string());
      if (sha256_hex(bytes) != entry.at("sha256").get<std::string>()) {
        throw BundleError(file + ": sha256 does not match manifest");
      }
      F32Reader reader(bytes, file);
      if (h.kind == HeadKind::kRidge) {
        h.weights = reader.take(b.embedding.dim);
        h.bias = reader.next();
      } else {
        h.hidden = entry.at("hidden").get<size_t>();
        h.w1 = reader.take(h.hidden * b.embedding.dim);
        h.b1 = reader.take(h.hidden);
        h.w2 = reader.take(h.hidden);
        h.b2 = reader.next();
      }
      reader.expect_end();
      b.heads.push_back(std::move(h));
    }
  } catch (const json::exception& e) {
    throw BundleError(manifest_path + ": " + e.what());
  }
  b.check();
  return b;
}

EmbeddedRows embed_rows(const LabelledDataset& dataset, std::span<const size_t> rows,
                        const Embedder& embedder, bool normalize_vectors) {
  std::vector<EmbedItem> items;
  items.reserve(rows.size());
  for (size_t r : rows) items.push_back({dataset.rows[r].record_id, dataset.rows[r].text});
  const auto outcomes = embedder.embed(items);

  EmbeddedRows out;
  const auto d = static_cast<Eigen::Index>(embedder.dim());
  std::vector<const EmbeddingVector*> ok;
  std::vector<EmbeddingVector> normalized;
  normalized.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!outcomes[i].vector || static_cast<Eigen::Index>(outcomes[i].vector->dim()) != d) {
      ++out.missing;
      continue;
    }
    if (normalize_vectors && !outcomes[i].vector->normalized) {
      try {
        normalized.push_back(normalize(*outcomes[i].vector));
      } catch (const EmbeddingError&) {
        ++out.missing;
        continue;
      }
      ok.push_back(&normalized.back());
    } else {
      ok.push_back(&*outcomes[i].vector);
    }
    out.present.push_back(rows[i]);
  }
  out.X.resize(static_cast<Eigen::Index>(ok.size()), d);
  for (size_t i = 0; i < ok.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.X(static_cast<Eigen::Index>(i), j) = ok[i]->values[static_cast<size_t>(j)];
  }
  return out;
}

ModelBundle train_bundle(const LabelledDataset& dataset, const Embedder& embedder,
                         const EmbeddingSpec& spec, const TrainOptions& options, TrainReport* report) {
  if (spec.dim != embedder.dim()) {
    throw TrainingError("embedding spec dim " + std::to_string(spec.dim) + " != embedder dim " +
                        std::to_string(embedder.dim()));
  }
  // Embed every row once; heads pick their subsets by row index.
  std::vector<size_t> all_rows(dataset.rows.size());
  for (size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
  const EmbeddedRows embedded = embed_rows(dataset, all_rows, embedder, spec.normalized);
  std::vector<Eigen::Index> row_of(dataset.rows.size(), -1);
  for (size_t i = 0; i < embedded.present.size(); ++i) {
    row_of[embedded.present[i]] = static_cast<Eigen::Index>(i);
  }

  ModelBundle bundle;
  bundle.version = options.version;
  bundle.embedding = spec;
  TrainReport local;
  local.missing_embeddings = embedded.missing;

  auto gather = [&](const ConsensusRows& rows, Matrix& X, std::vector<double>& y) {
    std::vector<Eigen::Index> keep;
    y.clear();
    for (size_t k = 0; k < rows.rows.size(); ++k) {
      const Eigen::Index r = row_of[rows.rows[k]];
      if (r < 0) continue;
      keep.push_back(r);
      y.push_back(rows.labels[static_cast<Eigen::Index>(k)]);
    }
    X.resize(static_cast<Eigen::Index>(keep.size()), embedded.X.cols());
    for (size_t k = 0; k < keep.size(); ++k) X.row(static_cast<Eigen::Index>(k)) = embedded.X.row(keep[k]);
  };

  for (const auto& target : all_targets()) {
    HeadTrainReport hr;
    hr.target = target;
    const ConsensusRows train_rows = filter_consensus_rows(dataset, target, Split::kTrain);
    hr.kept_fraction = train_rows.kept_fraction;
    Matrix X;
    std::vector<double> y;
    gather(train_rows, X, y);
    hr.n_train = y.size();
    for (double v : y) hr.n_pos += v > 0 ? 1 : 0;
    const Vector yv = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));

    Head head;
    if (options.kind == HeadKind::kRidge) {
      RidgeModel model = train_ridge(X, yv, options.alpha);
      model.target = target;
      head = Head::from_ridge(model, target);
      if (options.calibrate) {
        std::optional<ConsensusRows> valid_rows;
        try {
          valid_rows = filter_consensus_rows(dataset, target, Split::kValid);
        } catch (const TrainingError&) {
        }
        if (valid_rows) {
          Matrix Xv;
          std::vector<double> yv_cal;
          gather(*valid_rows, Xv, yv_cal);
          const bool both = std::any_of(yv_cal.begin(), yv_cal.end(), [](double v) { return v > 0; }) &&
                            std::any_of(yv_cal.begin(), yv_cal.end(), [](double v) { return v < 0; });
          if (both) {
            std::vector<double> raw(yv_cal.size());
            std::vector<float> buf(static_cast<size_t>(Xv.cols()));
            for (size_t i = 0; i < raw.size(); ++i) {
              for (Eigen::Index j = 0; j < Xv.cols(); ++j) buf[static_cast<size_t>(j)] = static_cast<float>(Xv(static_cast<Eigen::Index>(i), j));
              raw[i] = head.raw_score(buf);
            }
            head.platt = fit_platt(raw, yv_cal);
            head.calibration = Calibration::kSigmoid;
            head.threshold = 0.5;
            hr.calibrated = true;
            hr.n_calibration = raw.size();
          }
        }
      }
    } else {
      Vector y01 = (yv.array() > 0).cast<double>();
      head = Head::from_neural(train_nn(X, y01, options.nn), target);
    }
    bundle.heads.push_back(std::move(head));
    local.heads.push_back(hr);
  }
  bundle.check();
  if (report) *report = std::move(local);
  return bundle;
}

}  // namespace localguard
