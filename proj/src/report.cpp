#include "qsnn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <tuple>

namespace qsnn {

namespace {

using Key = std::tuple<int, bool, Correction>;

std::string variant_name(int p, bool na, Correction c) {
  return "p=" + std::to_string(p) + (na ? " w/ NA" : " w/o NA") + " [" + to_string(c) + "]";
}

struct Acc {
  double ann = 0.0;
  std::set<std::uint64_t> ann_seeds;
  std::map<std::size_t, std::pair<double, std::size_t>> by_T;
};

}  // namespace

PivotTable pivot_results(const std::vector<ResultRow>& rows) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  PivotTable table;
  std::set<std::size_t> Ts;
  std::map<Key, Acc> acc;
  for (const ResultRow& r : rows) {
    Ts.insert(r.T);
    Acc& a = acc[{r.p, r.noise_adaptor, r.correction}];
    if (a.ann_seeds.insert(r.seed).second) a.ann += r.ann_acc;
    auto& cell = a.by_T[r.T];
    cell.first += r.snn_acc;
    cell.second += 1;
  }
  table.Ts.assign(Ts.begin(), Ts.end());

  std::map<Key, PivotTable::Row> built;
  for (const auto& [key, a] : acc) {
    const auto& [p, na, corr] = key;
    PivotTable::Row row{variant_name(p, na, corr), a.ann / static_cast<double>(a.ann_seeds.size()), {},
                        a.ann_seeds.size()};
    for (std::size_t T : table.Ts) {
      auto it = a.by_T.find(T);
      row.acc.push_back(it == a.by_T.end() ? nan : it->second.first / static_cast<double>(it->second.second));
    }
    built[key] = row;
    table.rows.push_back(row);
  }
  for (const auto& [key, with] : built) {
    const auto& [p, na, corr] = key;
    if (!na) continue;
    auto it = built.find({p, false, corr});
    if (it == built.end()) continue;
    PivotTable::Row d{"p=" + std::to_string(p) + " delta NA [" + to_string(corr) + "]", with.ann - it->second.ann, {},
                      std::min(with.seeds, it->second.seeds)};
    for (std::size_t i = 0; i < table.Ts.size(); ++i) d.acc.push_back(with.acc[i] - it->second.acc[i]);
    table.deltas.push_back(d);
  }
  return table;
}

std::string pivot_csv(const PivotTable& table) {
  std::string out = "variant,ann";
  for (std::size_t T : table.Ts) out += ",T=" + std::to_string(T);
  out += "\n";
  auto emit = [&](const PivotTable::Row& r) {
    out += r.variant + "," + format_double(r.ann);
    for (double a : r.acc) out += "," + (std::isnan(a) ? std::string() : format_double(a));
    out += "\n";
  };
  for (const auto& r : table.rows) emit(r);
  for (const auto& r : table.deltas) emit(r);
  return out;
}

std::string pivot_text(const PivotTable& table) {
  std::size_t name_w = 7;
  for (const auto& r : table.rows) name_w = std::max(name_w, r.variant.size());
  for (const auto& r : table.deltas) name_w = std::max(name_w, r.variant.size());
  char buf[64];
  std::string out;
  auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  out += pad("variant", name_w) + "     ANN";
  for (std::size_t T : table.Ts) {
    std::snprintf(buf, sizeof buf, "%8s", ("T=" + std::to_string(T)).c_str());
    out += buf;
  }
  out += "\n";
  auto emit = [&](const PivotTable::Row& r, bool signed_pct) {
    out += pad(r.variant, name_w);
    std::snprintf(buf, sizeof buf, signed_pct ? "%+8.2f" : "%8.2f", 100.0 * r.ann);
    out += buf;
    for (double a : r.acc) {
      if (std::isnan(a))
        std::snprintf(buf, sizeof buf, "%8s", "-");
      else
        std::snprintf(buf, sizeof buf, signed_pct ? "%+8.2f" : "%8.2f", 100.0 * a);
      out += buf;
    }
    out += "\n";
  };
  for (const auto& r : table.rows) emit(r, false);
  if (!table.deltas.empty()) {
    out += "\n";
    for (const auto& r : table.deltas) emit(r, true);
  }
  out += "(accuracy in %, averaged over seeds)\n";
  return out;
}

}  // namespace qsnn
