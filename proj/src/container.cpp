#include "playtrace/container.hpp"

#include <fstream>
#include <sstream>

namespace playtrace {

namespace {

constexpr std::string_view kMagic = "PTMC";

constexpr std::uint32_t tag(const char (&t)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(t[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(t[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(t[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(t[3])) << 24;
}

constexpr std::uint32_t kKind = tag("KIND");
constexpr std::uint32_t kMeta = tag("META");
constexpr std::uint32_t kPrep = tag("PREP");
constexpr std::uint32_t kModl = tag("MODL");

void section(ByteWriter& out, std::uint32_t t, const std::string& payload) {
  out.u32(t);
  out.u64(payload.size());
  out.raw(payload);
}

std::string_view expect_section(ByteReader& in, std::uint32_t t, const char* name) {
  const auto got = in.u32();
  if (got != t) throw Error(ErrorCode::Format, std::string("expected section ") + name);
  const auto n = in.u64();
  if (n > in.remaining()) throw Error(ErrorCode::Format, std::string("section ") + name + " is truncated");
  return in.raw(static_cast<std::size_t>(n));
}

void write_strings(ByteWriter& out, const std::vector<std::string>& v) {
  out.u64(v.size());
  for (const auto& s : v) out.str(s);
}

std::vector<std::string> read_strings(ByteReader& in) {
  const auto n = in.u64();
  if (n > in.remaining() / 8) throw Error(ErrorCode::Format, "bad string list length");
  std::vector<std::string> v(n);
  for (auto& s : v) s = in.str();
  return v;
}

void write_bools(ByteWriter& out, const std::vector<bool>& v) {
  out.u64(v.size());
  for (bool b : v) out.u8(b ? 1 : 0);
}

std::vector<bool> read_bools(ByteReader& in) {
  const auto n = in.u64();
  if (n > in.remaining()) throw Error(ErrorCode::Format, "bad flag list length");
  std::vector<bool> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = in.u8() != 0;
  return v;
}

ModelConfig config_from(const FittedModel& model, const PreprocessOptions& prep) {
  ModelConfig c = default_model_config(kind_of(model));
  c.preprocess = prep;
  if (const auto* k = std::get_if<KnnModel>(&model)) {
    c.knn = {k->k, k->metric};
  } else if (const auto* m = std::get_if<MlpModel>(&model)) {
    c.mlp = m->config;
  } else {
    c.forest = std::get<ForestModel>(model).config;
  }
  return c;
}

}  // namespace

nlohmann::json ModelContainer::meta_json() const { return nlohmann::json::parse(meta); }

void write_preprocessor(ByteWriter& out, const Preprocessor& p) {
  out.u8(p.options.one_hot ? 1 : 0);
  out.u8(p.options.standardize ? 1 : 0);
  write_strings(out, p.input_names);
  write_strings(out, p.output_names);
  out.u64(p.encoder.categories.size());
  for (const auto& c : p.encoder.categories) out.f64s(c);
  out.f64s(p.impute_means);
  out.u8(p.scaler ? 1 : 0);
  if (p.scaler) {
    out.f64s(p.scaler->mean);
    out.f64s(p.scaler->stddev);
    write_bools(out, p.scaler->constant);
  }
}

Preprocessor read_preprocessor(ByteReader& in) {
  Preprocessor p;
  p.options.one_hot = in.u8() != 0;
  p.options.standardize = in.u8() != 0;
  p.input_names = read_strings(in);
  p.output_names = read_strings(in);
  const auto cats = in.u64();
  if (cats > in.remaining() / 8) throw Error(ErrorCode::Format, "bad category table count");
  p.encoder.categories.resize(cats);
  for (auto& c : p.encoder.categories) c = in.f64s();
  p.impute_means = in.f64s();
  if (in.u8() != 0) {
    ScalerParams s;
    s.mean = in.f64s();
    s.stddev = in.f64s();
    s.constant = read_bools(in);
    p.scaler = std::move(s);
  }
  if (p.impute_means.size() != p.output_names.size() ||
      (p.scaler && (p.scaler->mean.size() != p.output_names.size() ||
                    p.scaler->stddev.size() != p.output_names.size() ||
                    p.scaler->constant.size() != p.output_names.size())))
    throw Error(ErrorCode::Format, "preprocessor arrays disagree with the feature count");
  return p;
}

std::string encode(const ModelContainer& c) {
  if (kind_of(c.model.model) != c.kind) throw Error(ErrorCode::Internal, "container kind disagrees with its model");
  ByteWriter prep;
  write_preprocessor(prep, c.model.preprocessor);
  ByteWriter model;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) write_knn(model, m);
        else if constexpr (std::is_same_v<T, MlpModel>) write_mlp(model, m);
        else write_forest(model, m);
      },
      c.model.model);

  ByteWriter out;
  out.raw(kMagic);
  out.u32(kContainerVersion);
  section(out, kKind, std::string(to_string(c.kind)));
  section(out, kMeta, c.meta);
  section(out, kPrep, prep.bytes());
  section(out, kModl, model.bytes());
  return out.take();
}

ModelContainer decode(std::string_view bytes) {
  ByteReader in(bytes);
  if (bytes.size() < kMagic.size() || in.raw(kMagic.size()) != kMagic)
    throw Error(ErrorCode::Format, "not a model container");
  const auto version = in.u32();
  if (version != kContainerVersion)
    throw Error(ErrorCode::UnknownVersion, "container version " + std::to_string(version) + ", this build reads " +
                                               std::to_string(kContainerVersion));
  ModelContainer c;
  auto kind = parse_model_kind(expect_section(in, kKind, "KIND"));
  if (!kind) throw Error(ErrorCode::Format, "unknown model kind");
  c.kind = *kind;
  c.meta = std::string(expect_section(in, kMeta, "META"));
  if (!nlohmann::json::accept(c.meta)) throw Error(ErrorCode::Format, "container metadata is not JSON");

  ByteReader prep(expect_section(in, kPrep, "PREP"));
  Preprocessor p = read_preprocessor(prep);
  if (!prep.done()) throw Error(ErrorCode::Format, "trailing bytes in PREP");

  ByteReader model(expect_section(in, kModl, "MODL"));
  FittedModel fitted;
  switch (c.kind) {
    case ModelKind::Knn: fitted = read_knn(model); break;
    case ModelKind::Mlp: fitted = read_mlp(model); break;
    case ModelKind::Forest: fitted = read_forest(model); break;
  }
  if (!model.done()) throw Error(ErrorCode::Format, "trailing bytes in MODL");
  if (!in.done()) throw Error(ErrorCode::Format, "trailing bytes after the last section");

  c.model = TrainedModel{config_from(fitted, p.options), std::move(p), std::move(fitted)};
  return c;
}

void save_container(const std::string& path, const ModelContainer& container) {
  const std::string bytes = encode(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

ModelContainer load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open model '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode(buf.str());
}

}  // namespace playtrace
