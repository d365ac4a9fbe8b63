#include "playtrace/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace playtrace {

namespace {

constexpr std::uint32_t kAbsentCode = std::numeric_limits<std::uint32_t>::max();

struct NumericColumnDef {
  std::string_view name;
  std::optional<double> (*get)(const RawEvent&);
};

struct CategoricalColumnDef {
  std::string_view name;
  const std::string* (*get)(const RawEvent&);
};

template <typename T>
std::optional<double> widen(const std::optional<T>& v) {
  return v ? std::optional<double>(static_cast<double>(*v)) : std::nullopt;
}

const std::string* opt_ptr(const std::optional<std::string>& v) { return v ? &*v : nullptr; }

constexpr NumericColumnDef kNumericColumns[] = {
    {"index", [](const RawEvent& e) { return std::optional<double>(static_cast<double>(e.index)); }},
    {"elapsed_time", [](const RawEvent& e) { return std::optional<double>(static_cast<double>(e.elapsed_time)); }},
    {"level", [](const RawEvent& e) { return std::optional<double>(e.level); }},
    {"page", [](const RawEvent& e) { return widen(e.page); }},
    {"room_coor_x", [](const RawEvent& e) { return e.room_coor_x; }},
    {"room_coor_y", [](const RawEvent& e) { return e.room_coor_y; }},
    {"screen_coor_x", [](const RawEvent& e) { return e.screen_coor_x; }},
    {"screen_coor_y", [](const RawEvent& e) { return e.screen_coor_y; }},
    {"hover_duration", [](const RawEvent& e) { return widen(e.hover_duration); }},
    {"fullscreen", [](const RawEvent& e) { return std::optional<double>(e.fullscreen); }},
    {"hq", [](const RawEvent& e) { return std::optional<double>(e.hq); }},
    {"music", [](const RawEvent& e) { return std::optional<double>(e.music); }},
};

constexpr CategoricalColumnDef kCategoricalColumns[] = {
    {"event_name", [](const RawEvent& e) -> const std::string* { return &e.event_name; }},
    {"name", [](const RawEvent& e) -> const std::string* { return e.name.empty() ? nullptr : &e.name; }},
    {"fqid", [](const RawEvent& e) { return opt_ptr(e.fqid); }},
    {"room_fqid", [](const RawEvent& e) { return opt_ptr(e.room_fqid); }},
    {"text_fqid", [](const RawEvent& e) { return opt_ptr(e.text_fqid); }},
};

const NumericColumnDef* find_numeric(std::string_view name) {
  for (const auto& def : kNumericColumns)
    if (def.name == name) return &def;
  return nullptr;
}

const CategoricalColumnDef* find_categorical(std::string_view name) {
  for (const auto& def : kCategoricalColumns)
    if (def.name == name) return &def;
  return nullptr;
}

void neumaier_add(Aggregator::NumAcc& acc, double x) {
  const double t = acc.sum + x;
  if (std::fabs(acc.sum) >= std::fabs(x))
    acc.comp += (acc.sum - t) + x;
  else
    acc.comp += (x - t) + acc.sum;
  acc.sum = t;
}

constexpr AggKind kAllKinds[] = {AggKind::Mean,  AggKind::Sum,  AggKind::Min,   AggKind::Max,
                                 AggKind::First, AggKind::Last, AggKind::Count, AggKind::Nunique};

}  // namespace

std::string_view to_string(AggKind kind) {
  switch (kind) {
    case AggKind::Mean: return "mean";
    case AggKind::Sum: return "sum";
    case AggKind::Min: return "min";
    case AggKind::Max: return "max";
    case AggKind::First: return "first";
    case AggKind::Last: return "last";
    case AggKind::Count: return "count";
    case AggKind::Nunique: return "nunique";
  }
  return "?";
}

std::optional<AggKind> parse_agg_kind(std::string_view text) {
  for (AggKind k : kAllKinds)
    if (to_string(k) == text) return k;
  return std::nullopt;
}

bool is_numeric_kind(AggKind kind) {
  return kind == AggKind::Mean || kind == AggKind::Sum || kind == AggKind::Min || kind == AggKind::Max;
}

std::optional<ColumnClass> column_class(std::string_view column) {
  if (find_numeric(column)) return ColumnClass::Numeric;
  if (find_categorical(column)) return ColumnClass::Categorical;
  return std::nullopt;
}

AggregatorSpec make_spec(std::string column, AggKind kind, std::string output_name) {
  if (output_name.empty()) output_name = column + "_" + std::string(to_string(kind));
  return AggregatorSpec{std::move(column), kind, std::move(output_name)};
}

AggregatorSpec parse_spec(std::string_view feature_name) {
  auto cut = feature_name.rfind('_');
  if (cut == std::string_view::npos) throw Error(ErrorCode::ConfigInvalid, "bad feature name '" + std::string(feature_name) + "'");
  auto kind = parse_agg_kind(feature_name.substr(cut + 1));
  if (!kind) throw Error(ErrorCode::ConfigInvalid, "unknown aggregation in '" + std::string(feature_name) + "'");
  return make_spec(std::string(feature_name.substr(0, cut)), *kind);
}

std::vector<AggregatorSpec> default_specs() {
  return {
      make_spec("room_coor_x", AggKind::Mean),   make_spec("room_coor_y", AggKind::Mean),
      make_spec("screen_coor_x", AggKind::Mean), make_spec("screen_coor_y", AggKind::Mean),
      make_spec("elapsed_time", AggKind::Sum),   make_spec("level", AggKind::Mean),
      make_spec("music", AggKind::Max),          make_spec("name", AggKind::Nunique),
      make_spec("room_fqid", AggKind::Nunique),  make_spec("event_name", AggKind::Nunique),
      make_spec("fqid", AggKind::Count),
  };
}

std::vector<AggregatorSpec> candidate_specs() {
  std::vector<AggregatorSpec> out;
  for (const auto& def : kNumericColumns)
    for (AggKind k : {AggKind::Mean, AggKind::Sum, AggKind::Min, AggKind::Max})
      out.push_back(make_spec(std::string(def.name), k));
  for (const auto& def : kCategoricalColumns)
    for (AggKind k : {AggKind::First, AggKind::Last, AggKind::Count, AggKind::Nunique})
      out.push_back(make_spec(std::string(def.name), k));
  return out;
}

//
// FeatureMatrix
//

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

std::optional<std::size_t> FeatureMatrix::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  return std::nullopt;
}

bool FeatureMatrix::is_code_column(std::size_t c) const {
  return columns[c].kind == AggKind::First || columns[c].kind == AggKind::Last;
}

std::optional<std::string> FeatureMatrix::decode(std::size_t row, std::size_t col) const {
  const auto& cell = rows[row].values[col];
  if (!cell || !is_code_column(col)) return std::nullopt;
  const auto& table = code_tables.at(columns[col].source);
  return table.at(static_cast<std::size_t>(*cell));
}

//
// Aggregator
//

std::size_t Aggregator::GroupKeyHash::operator()(const GroupKey& k) const noexcept {
  std::uint64_t state = k.session * 3 + static_cast<std::uint64_t>(k.group);
  return static_cast<std::size_t>(splitmix64(state));
}

std::uint32_t Aggregator::Dictionary::intern(std::string_view value) {
  auto it = codes.find(std::string(value));
  if (it != codes.end()) return it->second;
  const auto code = static_cast<std::uint32_t>(values.size());
  values.emplace_back(value);
  codes.emplace(values.back(), code);
  return code;
}

Aggregator::Aggregator(std::vector<AggregatorSpec> specs, std::size_t partitions)
    : specs_(std::move(specs)), partitions_(std::max<std::size_t>(partitions, 1)) {
  if (specs_.empty()) throw Error(ErrorCode::ConfigInvalid, "aggregation needs at least one spec");
  std::vector<std::string> seen_names;
  for (auto& spec : specs_) {
    if (spec.output_name.empty()) spec.output_name = spec.column + "_" + std::string(to_string(spec.kind));
    if (std::find(seen_names.begin(), seen_names.end(), spec.output_name) != seen_names.end())
      throw Error(ErrorCode::ConfigInvalid, "duplicate feature name '" + spec.output_name + "'");
    seen_names.push_back(spec.output_name);

    auto cls = column_class(spec.column);
    if (!cls) throw Error(ErrorCode::ConfigInvalid, "column '" + spec.column + "' cannot be aggregated");
    const bool numeric_kind = is_numeric_kind(spec.kind);
    if (numeric_kind != (*cls == ColumnClass::Numeric))
      throw Error(ErrorCode::SpecTypeMismatch, spec.output_name + ": " + std::string(to_string(spec.kind)) +
                                                   " does not apply to " +
                                                   (*cls == ColumnClass::Numeric ? "numeric" : "categorical") +
                                                   " column " + spec.column);
    auto& cols = numeric_kind ? num_columns_ : cat_columns_;
    auto it = std::find(cols.begin(), cols.end(), spec.column);
    const auto slot = static_cast<std::size_t>(it - cols.begin());
    if (it == cols.end()) {
      cols.push_back(spec.column);
      if (numeric_kind) {
        num_get_.push_back(find_numeric(spec.column)->get);
      } else {
        cat_get_.push_back(find_categorical(spec.column)->get);
        cat_needs_distinct_.push_back(false);
        dictionaries_.emplace_back();
      }
    }
    if (!numeric_kind && spec.kind == AggKind::Nunique) cat_needs_distinct_[slot] = true;
    spec_slot_.push_back(slot);
  }
}

std::size_t Aggregator::partition_of(SessionId session) const {
  std::uint64_t state = session;
  return static_cast<std::size_t>(splitmix64(state) % partitions_.size());
}

void Aggregator::encode(const RawEvent& ev, double* num_out, std::uint32_t* cat_out) {
  for (std::size_t i = 0; i < num_get_.size(); ++i) {
    auto v = num_get_[i](ev);
    num_out[i] = v ? *v : std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t i = 0; i < cat_get_.size(); ++i) {
    const std::string* s = cat_get_[i](ev);
    cat_out[i] = s ? dictionaries_[i].intern(*s) : kAbsentCode;
  }
}

void Aggregator::apply(Partition& part, const GroupKey& key, std::uint64_t index, const double* num,
                       const std::uint32_t* cat) {
  auto [it, inserted] = part.try_emplace(key);
  GroupState& state = it->second;
  if (inserted) {
    state.num.resize(num_columns_.size());
    state.cat.resize(cat_columns_.size());
  }
  for (std::size_t i = 0; i < num_columns_.size(); ++i) {
    const double x = num[i];
    if (std::isnan(x)) continue;
    NumAcc& acc = state.num[i];
    if (acc.count == 0) {
      acc.min = acc.max = x;
    } else {
      acc.min = std::min(acc.min, x);
      acc.max = std::max(acc.max, x);
    }
    neumaier_add(acc, x);
    ++acc.count;
  }
  for (std::size_t i = 0; i < cat_columns_.size(); ++i) {
    const std::uint32_t code = cat[i];
    if (code == kAbsentCode) continue;
    CatAcc& acc = state.cat[i];
    if (cat_needs_distinct_[i]) acc.distinct.insert(code);
    const auto& values = dictionaries_[i].values;
    if (acc.count == 0) {
      acc.first_index = acc.last_index = index;
      acc.first_code = acc.last_code = code;
    } else {
      // Equal indices resolve by category string so the result does not
      // depend on arrival order.
      if (index < acc.first_index || (index == acc.first_index && values[code] < values[acc.first_code])) {
        acc.first_index = index;
        acc.first_code = code;
      }
      if (index > acc.last_index || (index == acc.last_index && values[code] > values[acc.last_code])) {
        acc.last_index = index;
        acc.last_code = code;
      }
    }
    ++acc.count;
  }
}

void Aggregator::add(const RawEvent& ev) {
  std::vector<double> num(num_columns_.size());
  std::vector<std::uint32_t> cat(cat_columns_.size());
  encode(ev, num.data(), cat.data());
  apply(partitions_[partition_of(ev.session_id)], GroupKey{ev.session_id, ev.level_group}, ev.index, num.data(),
        cat.data());
  ++events_seen_;
}

void Aggregator::add_batch_serial(std::span<const RawEvent> events) {
  for (const auto& ev : events) add(ev);
}

void Aggregator::add_batch(std::span<const RawEvent> events) {
  const std::size_t n = events.size();
  const std::size_t nn = num_columns_.size();
  const std::size_t nc = cat_columns_.size();
  std::vector<double> num(n * nn);
  std::vector<std::uint32_t> cat(n * nc);
  std::vector<std::size_t> part_of(n);
  std::vector<std::size_t> bucket_size(partitions_.size(), 0);

  // Interning is sequential so codes follow first appearance in the stream.
  for (std::size_t i = 0; i < n; ++i) {
    encode(events[i], num.data() + i * nn, cat.data() + i * nc);
    part_of[i] = partition_of(events[i].session_id);
    ++bucket_size[part_of[i]];
  }
  std::vector<std::size_t> offset(partitions_.size() + 1, 0);
  for (std::size_t p = 0; p < partitions_.size(); ++p) offset[p + 1] = offset[p] + bucket_size[p];
  std::vector<std::size_t> order(n);
  {
    std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
    for (std::size_t i = 0; i < n; ++i) order[cursor[part_of[i]]++] = i;
  }

  const auto parts = static_cast<std::ptrdiff_t>(partitions_.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(parallel::workers())
  for (std::ptrdiff_t p = 0; p < parts; ++p) {
    auto up = static_cast<std::size_t>(p);
    for (std::size_t k = offset[up]; k < offset[up + 1]; ++k) {
      const std::size_t i = order[k];
      const auto& ev = events[i];
      apply(partitions_[up], GroupKey{ev.session_id, ev.level_group}, ev.index, num.data() + i * nn,
            cat.data() + i * nc);
    }
  }
  events_seen_ += n;
}

void Aggregator::merge_state(GroupState& into, const GroupState& from) const {
  for (std::size_t i = 0; i < into.num.size(); ++i) {
    NumAcc& a = into.num[i];
    const NumAcc& b = from.num[i];
    if (b.count == 0) continue;
    if (a.count == 0) {
      a = b;
      continue;
    }
    a.min = std::min(a.min, b.min);
    a.max = std::max(a.max, b.max);
    neumaier_add(a, b.sum);
    neumaier_add(a, b.comp);
    a.count += b.count;
  }
  for (std::size_t i = 0; i < into.cat.size(); ++i) {
    CatAcc& a = into.cat[i];
    const CatAcc& b = from.cat[i];
    if (b.count == 0) continue;
    if (a.count == 0) {
      a = b;
      continue;
    }
    const auto& values = dictionaries_[i].values;
    a.distinct.insert(b.distinct.begin(), b.distinct.end());
    if (b.first_index < a.first_index ||
        (b.first_index == a.first_index && values[b.first_code] < values[a.first_code])) {
      a.first_index = b.first_index;
      a.first_code = b.first_code;
    }
    if (b.last_index > a.last_index ||
        (b.last_index == a.last_index && values[b.last_code] > values[a.last_code])) {
      a.last_index = b.last_index;
      a.last_code = b.last_code;
    }
    a.count += b.count;
  }
}

void Aggregator::merge(const Aggregator& other) {
  if (other.specs_ != specs_) throw Error(ErrorCode::ConfigInvalid, "merge: aggregators use different specs");
  std::vector<std::vector<std::uint32_t>> remap(cat_columns_.size());
  for (std::size_t i = 0; i < cat_columns_.size(); ++i)
    for (const auto& value : other.dictionaries_[i].values) remap[i].push_back(dictionaries_[i].intern(value));

  for (const auto& part : other.partitions_) {
    for (const auto& [key, state] : part) {
      GroupState moved = state;
      for (std::size_t i = 0; i < moved.cat.size(); ++i) {
        CatAcc& acc = moved.cat[i];
        if (acc.count == 0) continue;
        acc.first_code = remap[i][acc.first_code];
        acc.last_code = remap[i][acc.last_code];
        std::unordered_set<std::uint32_t> distinct;
        for (auto c : acc.distinct) distinct.insert(remap[i][c]);
        acc.distinct = std::move(distinct);
      }
      auto& target = partitions_[partition_of(key.session)];
      auto [it, inserted] = target.try_emplace(key);
      if (inserted) {
        it->second = std::move(moved);
      } else {
        merge_state(it->second, moved);
      }
    }
  }
  events_seen_ += other.events_seen_;
}

std::size_t Aggregator::group_count() const {
  std::size_t n = 0;
  for (const auto& p : partitions_) n += p.size();
  return n;
}

FeatureMatrix Aggregator::finish() const {
  FeatureMatrix out;
  out.specs = specs_;
  for (const auto& spec : specs_) out.columns.push_back(FeatureColumn{spec.output_name, spec.column, spec.kind});

  std::vector<std::pair<GroupKey, const GroupState*>> groups;
  groups.reserve(group_count());
  for (const auto& part : partitions_)
    for (const auto& [key, state] : part) groups.emplace_back(key, &state);
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  out.rows.reserve(groups.size());
  for (const auto& [key, state] : groups) {
    FeatureRow row{key.session, key.group, {}};
    row.values.reserve(specs_.size());
    for (std::size_t s = 0; s < specs_.size(); ++s) {
      const auto slot = spec_slot_[s];
      std::optional<double> value;
      switch (specs_[s].kind) {
        case AggKind::Mean:
        case AggKind::Sum:
        case AggKind::Min:
        case AggKind::Max: {
          const NumAcc& acc = state->num[slot];
          if (acc.count == 0) break;
          const double sum = acc.sum + acc.comp;
          if (specs_[s].kind == AggKind::Sum) value = sum;
          if (specs_[s].kind == AggKind::Min) value = acc.min;
          if (specs_[s].kind == AggKind::Max) value = acc.max;
          if (specs_[s].kind == AggKind::Mean)
            value = std::clamp(sum / static_cast<double>(acc.count), acc.min, acc.max);
          break;
        }
        case AggKind::Count: value = static_cast<double>(state->cat[slot].count); break;
        case AggKind::Nunique: value = static_cast<double>(state->cat[slot].distinct.size()); break;
        case AggKind::First:
          if (state->cat[slot].count > 0) value = static_cast<double>(state->cat[slot].first_code);
          break;
        case AggKind::Last:
          if (state->cat[slot].count > 0) value = static_cast<double>(state->cat[slot].last_code);
          break;
      }
      row.values.push_back(value);
    }
    out.rows.push_back(std::move(row));
  }

  for (std::size_t s = 0; s < specs_.size(); ++s)
    if (specs_[s].kind == AggKind::First || specs_[s].kind == AggKind::Last)
      out.code_tables[specs_[s].column] = dictionaries_[spec_slot_[s]].values;
  return out;
}

FeatureMatrix aggregate(std::span<const RawEvent> events, const std::vector<AggregatorSpec>& specs) {
  Aggregator agg(specs);
  agg.add_batch(events);
  return agg.finish();
}

FeatureMatrix aggregate(EventReader& reader, const std::vector<AggregatorSpec>& specs, std::size_t batch_rows) {
  Aggregator agg(specs);
  std::vector<RawEvent> batch;
  while (reader.next_batch(batch, batch_rows)) agg.add_batch(batch);
  return agg.finish();
}

FeatureMatrix concat_shards(std::span<const FeatureMatrix> shards) {
  FeatureMatrix out;
  if (shards.empty()) return out;
  out.columns = shards.front().columns;
  out.specs = shards.front().specs;
  std::map<std::string, std::unordered_map<std::string, std::size_t>> lookup;
  for (const auto& shard : shards) {
    if (shard.column_names() != out.column_names())
      throw Error(ErrorCode::PartitionMismatch, "shards have different columns");
    std::map<std::string, std::vector<std::size_t>> remap;
    for (const auto& [column, table] : shard.code_tables) {
      auto& unified = out.code_tables[column];
      auto& index = lookup[column];
      auto& r = remap[column];
      for (const auto& value : table) {
        auto [it, inserted] = index.try_emplace(value, unified.size());
        if (inserted) unified.push_back(value);
        r.push_back(it->second);
      }
    }
    for (auto row : shard.rows) {
      for (std::size_t c = 0; c < row.values.size(); ++c)
        if (shard.is_code_column(c) && row.values[c])
          row.values[c] = static_cast<double>(remap.at(out.columns[c].source).at(static_cast<std::size_t>(*row.values[c])));
      out.rows.push_back(std::move(row));
    }
  }
  auto key_less = [](const FeatureRow& a, const FeatureRow& b) {
    return a.session_id != b.session_id ? a.session_id < b.session_id : a.level_group < b.level_group;
  };
  std::sort(out.rows.begin(), out.rows.end(), key_less);
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (!key_less(out.rows[i - 1], out.rows[i]))
      throw Error(ErrorCode::PartitionMismatch, "session " + std::to_string(out.rows[i].session_id) + " spans shards");
  return out;
}

//
// Persistence
//

void write_features_csv(std::ostream& out, const FeatureMatrix& features) {
  std::string line = "session_id,level_group";
  for (const auto& c : features.columns) csv::append_field(line, c.name, false);
  out << line << '\n';
  for (const auto& row : features.rows) {
    line = std::to_string(row.session_id);
    line += ',';
    line += to_string(row.level_group);
    for (const auto& v : row.values) {
      line += ',';
      if (v) line += format_double(*v);
    }
    out << line << '\n';
  }
}

nlohmann::json features_metadata(const FeatureMatrix& features) {
  nlohmann::json meta;
  meta["format"] = "playtrace-features";
  meta["version"] = 1;
  meta["rows"] = features.rows.size();
  auto& cols = meta["columns"] = nlohmann::json::array();
  for (const auto& c : features.columns) {
    const bool numeric = is_numeric_kind(c.kind);
    cols.push_back({{"name", c.name},
                    {"source", c.source},
                    {"kind", to_string(c.kind)},
                    {"type", numeric ? "numeric" : (c.kind == AggKind::First || c.kind == AggKind::Last) ? "code" : "integer"}});
  }
  auto& specs = meta["specs"] = nlohmann::json::array();
  for (const auto& s : features.specs)
    specs.push_back({{"column", s.column}, {"kind", to_string(s.kind)}, {"output_name", s.output_name}});
  meta["code_tables"] = nlohmann::json::object();
  for (const auto& [column, table] : features.code_tables) meta["code_tables"][column] = table;
  return meta;
}

FeatureMatrix read_features(std::istream& csv_in, const nlohmann::json& metadata) {
  if (metadata.value("format", "") != "playtrace-features")
    throw Error(ErrorCode::Format, "feature metadata has the wrong format tag");
  if (metadata.value("version", 0) != 1) throw Error(ErrorCode::UnknownVersion, "feature metadata version");
  FeatureMatrix fm;
  for (const auto& c : metadata.at("columns")) {
    auto kind = parse_agg_kind(c.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::Format, "unknown aggregation kind in metadata");
    fm.columns.push_back(FeatureColumn{c.at("name").get<std::string>(), c.at("source").get<std::string>(), *kind});
  }
  for (const auto& s : metadata.at("specs")) {
    auto kind = parse_agg_kind(s.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::Format, "unknown aggregation kind in metadata");
    fm.specs.push_back(AggregatorSpec{s.at("column").get<std::string>(), *kind, s.at("output_name").get<std::string>()});
  }
  for (const auto& [column, table] : metadata.at("code_tables").items())
    fm.code_tables[column] = table.get<std::vector<std::string>>();

  csv::RecordReader records(csv_in);
  std::string line;
  std::vector<std::string> fields;
  if (!records.next_raw(line) || !csv::split(line, fields)) throw Error(ErrorCode::Format, "feature file has no header");
  if (fields.size() != fm.columns.size() + 2 || fields[0] != "session_id" || fields[1] != "level_group")
    throw Error(ErrorCode::Format, "feature header does not match metadata");
  for (std::size_t c = 0; c < fm.columns.size(); ++c)
    if (fields[c + 2] != fm.columns[c].name)
      throw Error(ErrorCode::Format, "feature column '" + fields[c + 2] + "' does not match metadata");

  while (records.next_raw(line)) {
    if (line.empty()) continue;
    const std::string where = "feature row " + std::to_string(records.records_read() - 1);
    if (!csv::split(line, fields) || fields.size() != fm.columns.size() + 2)
      throw Error(ErrorCode::Format, where + ": bad field count");
    FeatureRow row;
    auto session = parse_uint(fields[0]);
    auto group = parse_level_group(fields[1]);
    if (!session || !group) throw Error(ErrorCode::TypeError, where + ": bad key");
    row.session_id = *session;
    row.level_group = *group;
    for (std::size_t c = 0; c < fm.columns.size(); ++c) {
      const auto& text = fields[c + 2];
      if (text.empty()) {
        row.values.emplace_back();
        continue;
      }
      auto v = parse_double(text);
      if (!v) throw Error(ErrorCode::TypeError, where + ": column " + fm.columns[c].name);
      row.values.push_back(*v);
    }
    fm.rows.push_back(std::move(row));
  }
  return fm;
}

CompressionReport compression_report(const IngestStats& ingest, const FeatureMatrix& features) {
  CompressionReport report;
  report.input_bytes = ingest.bytes_read;
  report.input_rows = ingest.rows_total;
  report.output_rows = features.rows.size();
  std::ostringstream csv_out;
  write_features_csv(csv_out, features);
  report.output_bytes = csv_out.str().size() + features_metadata(features).dump(2).size();
  if (report.input_rows > 0 && report.input_bytes > 0)
    report.ratio = static_cast<double>(report.output_bytes) / static_cast<double>(report.input_bytes);
  return report;
}

nlohmann::json to_json(const CompressionReport& report) {
  nlohmann::json j;
  j["input_bytes"] = report.input_bytes;
  j["output_bytes"] = report.output_bytes;
  j["input_rows"] = report.input_rows;
  j["output_rows"] = report.output_rows;
  j["ratio"] = report.ratio ? nlohmann::json(*report.ratio) : nlohmann::json("n/a");
  return j;
}

}  // namespace playtrace
