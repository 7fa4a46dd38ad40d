#include "segtraj/panel.hpp"

#include "segtraj/csv.hpp"
#include "segtraj/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

namespace segtraj {

int VariableSpec::active_count() const {
    int q = 0;
    for (const auto& v : variables)
        if (v.role == VariableRole::active) ++q;
    return q;
}

int VariableSpec::total_active_modalities() const {
    int j = 0;
    for (const auto& v : variables)
        if (v.role == VariableRole::active) j += v.modality_count;
    return j;
}

std::vector<int> VariableSpec::active_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(variables.size()); ++i)
        if (variables[static_cast<std::size_t>(i)].role == VariableRole::active) idx.push_back(i);
    return idx;
}

std::vector<int> VariableSpec::supplementary_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(variables.size()); ++i)
        if (variables[static_cast<std::size_t>(i)].role == VariableRole::supplementary)
            idx.push_back(i);
    return idx;
}

void VariableSpec::validate() const {
    if (active_count() < 1) throw InvalidSpecError("spec needs at least one active variable");
    std::map<std::string, int> seen;
    for (const auto& v : variables) {
        if (v.id.empty()) throw InvalidSpecError("variable with empty id");
        if (++seen[v.id] > 1) throw InvalidSpecError("duplicate variable id '" + v.id + "'");
        if (v.role == VariableRole::active && v.modality_count < 2)
            throw InvalidSpecError("active variable '" + v.id + "' needs >= 2 modalities");
        if (v.role == VariableRole::supplementary && v.modality_count < 0)
            throw InvalidSpecError("variable '" + v.id + "' has negative modality count");
    }
}

VariableSpec default_variable_spec() {
    VariableSpec spec;
    char buf[32];
    // 11 four-modality + 11 five-modality active variables: J = 44 + 55 = 99.
    for (int i = 0; i < 22; ++i) {
        std::snprintf(buf, sizeof(buf), "v%02d", i + 1);
        spec.variables.push_back(
            {buf, std::string("active ") + buf, VariableRole::active, i < 11 ? 4 : 5});
    }
    for (int i = 0; i < 20; ++i) {
        std::snprintf(buf, sizeof(buf), "s%02d", i + 1);
        spec.variables.push_back(
            {buf, std::string("supplementary ") + buf, VariableRole::supplementary, 3});
    }
    for (int i = 20; i < 28; ++i) {
        std::snprintf(buf, sizeof(buf), "s%02d", i + 1);
        spec.variables.push_back(
            {buf, std::string("numeric ") + buf, VariableRole::supplementary, 0});
    }
    spec.validate();
    return spec;
}

bool PanelRecord::operator==(const PanelRecord& other) const {
    if (individual_id != other.individual_id || year != other.year || answers != other.answers ||
        supplementary.size() != other.supplementary.size())
        return false;
    for (std::size_t i = 0; i < supplementary.size(); ++i) {
        const double a = supplementary[i];
        const double b = other.supplementary[i];
        if (std::isnan(a) != std::isnan(b)) return false;
        if (!std::isnan(a) && a != b) return false;
    }
    return true;
}

void Panel::validate() const {
    spec.validate();
    const auto active = spec.active_indices();
    const auto supp = spec.supplementary_indices();
    std::unordered_map<std::string, std::vector<int>> years_by_individual;
    for (const auto& rec : records) {
        if (rec.answers.size() != active.size())
            throw InvalidSpecError("record for '" + rec.individual_id +
                                   "' has wrong active answer count");
        if (rec.supplementary.size() != supp.size())
            throw InvalidSpecError("record for '" + rec.individual_id +
                                   "' has wrong supplementary count");
        for (std::size_t a = 0; a < active.size(); ++a) {
            const auto& var = spec.variables[static_cast<std::size_t>(active[a])];
            if (rec.answers[a] < 1 || rec.answers[a] > var.modality_count)
                throw ModalityOutOfRangeError("modality " + std::to_string(rec.answers[a]) +
                                                  " out of range for '" + var.id + "'",
                                              0);
        }
        years_by_individual[rec.individual_id].push_back(rec.year);
    }
    for (auto& [id, years] : years_by_individual) {
        std::sort(years.begin(), years.end());
        for (std::size_t i = 1; i < years.size(); ++i) {
            if (years[i] == years[i - 1])
                throw DuplicateObservationError("duplicate observation for '" + id + "'", 0);
            if (years[i] != years[i - 1] + 1)
                throw GapInYearsError("years of '" + id + "' are not consecutive", id);
        }
    }
    if (!records.empty()) {
        int lo = records.front().year;
        int hi = lo;
        for (const auto& rec : records) {
            lo = std::min(lo, rec.year);
            hi = std::max(hi, rec.year);
        }
        if (first_year != lo || last_year != hi)
            throw InvalidSpecError("panel year_range does not match records");
    }
}

namespace {

void refresh_year_range(Panel& panel) {
    if (panel.records.empty()) {
        panel.first_year = 0;
        panel.last_year = -1;
        return;
    }
    panel.first_year = panel.records.front().year;
    panel.last_year = panel.first_year;
    for (const auto& rec : panel.records) {
        panel.first_year = std::min(panel.first_year, rec.year);
        panel.last_year = std::max(panel.last_year, rec.year);
    }
}

} // namespace

Panel ingest_csv(const std::filesystem::path& path, const VariableSpec& spec) {
    spec.validate();
    const CsvTable table = read_csv(path);

    auto column_of = [&table, &path](const std::string& name) {
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (table.header[c] == name) return c;
        throw MissingColumnError("'" + path.string() + "': missing column '" + name + "'");
    };
    const std::size_t id_col = column_of("id");
    const std::size_t year_col = column_of("year");
    std::vector<std::size_t> var_cols;
    var_cols.reserve(spec.variables.size());
    for (const auto& v : spec.variables) var_cols.push_back(column_of(v.id));

    const auto active = spec.active_indices();
    const auto supp = spec.supplementary_indices();

    Panel panel;
    panel.spec = spec;
    panel.records.reserve(table.rows.size());

    std::unordered_map<std::string, std::vector<std::pair<int, std::size_t>>> years_seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t row_no = r + 1;
        const std::string where = "row " + std::to_string(row_no);
        if (row.size() < table.header.size())
            throw Error("'" + path.string() + "' " + where + ": too few fields");

        PanelRecord rec;
        rec.individual_id = row[id_col];
        rec.year = static_cast<int>(parse_long(row[year_col], where + " year"));

        rec.answers.reserve(active.size());
        for (int vi : active) {
            const auto& var = spec.variables[static_cast<std::size_t>(vi)];
            const std::string& field = row[var_cols[static_cast<std::size_t>(vi)]];
            const long m = parse_long(field, where + " variable '" + var.id + "'");
            if (m < 1 || m > var.modality_count)
                throw ModalityOutOfRangeError(where + ": modality " + std::to_string(m) +
                                                  " out of range 1.." +
                                                  std::to_string(var.modality_count) + " for '" +
                                                  var.id + "'",
                                              row_no);
            rec.answers.push_back(static_cast<int>(m));
        }
        rec.supplementary.reserve(supp.size());
        for (int vi : supp) {
            const auto& var = spec.variables[static_cast<std::size_t>(vi)];
            const std::string& field = row[var_cols[static_cast<std::size_t>(vi)]];
            if (field.empty()) {
                rec.supplementary.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            if (var.is_numeric()) {
                rec.supplementary.push_back(parse_double(field, where + " '" + var.id + "'"));
            } else {
                const long m = parse_long(field, where + " variable '" + var.id + "'");
                if (m < 1 || m > var.modality_count)
                    throw ModalityOutOfRangeError(where + ": modality " + std::to_string(m) +
                                                      " out of range for '" + var.id + "'",
                                                  row_no);
                rec.supplementary.push_back(static_cast<double>(m));
            }
        }

        auto& seen = years_seen[rec.individual_id];
        for (const auto& [year, first_row] : seen)
            if (year == rec.year)
                throw DuplicateObservationError(
                    where + ": duplicate observation (" + rec.individual_id + ", " +
                        std::to_string(rec.year) + "), first seen at row " +
                        std::to_string(first_row),
                    row_no);
        seen.emplace_back(rec.year, row_no);
        panel.records.push_back(std::move(rec));
    }

    for (auto& [id, seen] : years_seen) {
        std::sort(seen.begin(), seen.end());
        for (std::size_t i = 1; i < seen.size(); ++i)
            if (seen[i].first != seen[i - 1].first + 1)
                throw GapInYearsError("individual '" + id + "' has non-consecutive years " +
                                          std::to_string(seen[i - 1].first) + " and " +
                                          std::to_string(seen[i].first),
                                      id);
    }

    refresh_year_range(panel);
    return panel;
}

void write_csv(const Panel& panel, const std::filesystem::path& path) {
    const auto& spec = panel.spec;
    const auto active = spec.active_indices();
    const auto supp = spec.supplementary_indices();

    CsvTable table;
    table.header.push_back("id");
    table.header.push_back("year");
    for (const auto& v : spec.variables) table.header.push_back(v.id);

    // Column position of each variable relative to spec order.
    std::vector<std::size_t> position(spec.variables.size());
    for (std::size_t i = 0; i < spec.variables.size(); ++i) position[i] = 2 + i;

    table.rows.reserve(panel.records.size());
    for (const auto& rec : panel.records) {
        if (rec.individual_id.find_first_of(",\"\n") != std::string::npos)
            throw Error("individual id '" + rec.individual_id + "' not representable in CSV");
        std::vector<std::string> row(table.header.size());
        row[0] = rec.individual_id;
        row[1] = std::to_string(rec.year);
        for (std::size_t a = 0; a < active.size(); ++a)
            row[position[static_cast<std::size_t>(active[a])]] = std::to_string(rec.answers[a]);
        for (std::size_t s = 0; s < supp.size(); ++s) {
            const double v = rec.supplementary[s];
            const auto& var = spec.variables[static_cast<std::size_t>(supp[s])];
            std::string& out = row[position[static_cast<std::size_t>(supp[s])]];
            if (std::isnan(v))
                out = "";
            else if (var.is_numeric())
                out = format_double(v);
            else
                out = std::to_string(static_cast<long>(v));
        }
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

Panel filter_panel(const Panel& panel, int min_consecutive) {
    if (min_consecutive < 1) throw Error("filter_panel: min_consecutive must be >= 1");
    std::unordered_map<std::string, int> span;
    for (const auto& rec : panel.records) ++span[rec.individual_id];

    Panel out;
    out.spec = panel.spec;
    for (const auto& rec : panel.records)
        if (span[rec.individual_id] >= min_consecutive) out.records.push_back(rec);
    refresh_year_range(out);
    return out;
}

void LatentDynamics::validate(const VariableSpec& spec) const {
    if (k < 1) throw InvalidSpecError("latent dynamics need k >= 1");
    if (static_cast<int>(initial.size()) != k)
        throw InvalidSpecError("latent initial distribution has wrong size");
    double total = 0.0;
    for (double p : initial) {
        if (p < 0.0) throw InvalidSpecError("latent initial distribution has negative mass");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw InvalidSpecError("latent initial distribution does not sum to 1");
    if (transitions.empty()) throw InvalidSpecError("latent dynamics need a transition matrix");
    for (const auto& t : transitions) {
        if (t.rows() != k || t.cols() != k)
            throw InvalidSpecError("latent transition matrix has wrong shape");
        for (int i = 0; i < k; ++i) {
            double row = t.row(i).sum();
            if (t.row(i).minCoeff() < 0.0 || std::abs(row - 1.0) > 1e-9)
                throw InvalidSpecError("latent transition matrix row " + std::to_string(i + 1) +
                                       " is not a distribution");
        }
    }
    const auto active = spec.active_indices();
    if (static_cast<int>(modality_dists.size()) != k)
        throw InvalidSpecError("modality_dists must have one entry per segment");
    for (const auto& per_var : modality_dists) {
        if (per_var.size() != active.size())
            throw InvalidSpecError("modality_dists must cover every active variable");
        for (std::size_t v = 0; v < per_var.size(); ++v) {
            const auto& var = spec.variables[static_cast<std::size_t>(active[v])];
            if (static_cast<int>(per_var[v].size()) != var.modality_count)
                throw InvalidSpecError("modality distribution size mismatch for '" + var.id + "'");
        }
    }
    if (!supplementary_dists.empty()) {
        const auto supp = spec.supplementary_indices();
        if (static_cast<int>(supplementary_dists.size()) != k)
            throw InvalidSpecError("supplementary_dists must have one entry per segment");
        for (const auto& per_var : supplementary_dists)
            if (per_var.size() != supp.size())
                throw InvalidSpecError("supplementary_dists must cover every supplementary "
                                       "variable (empty dist for numeric ones)");
    }
}

LatentDynamics LatentDynamics::well_separated(const VariableSpec& spec, int k, double peak_mass,
                                              Eigen::MatrixXd transition,
                                              std::vector<double> initial) {
    if (peak_mass <= 0.0 || peak_mass >= 1.0)
        throw InvalidSpecError("peak_mass must be in (0, 1)");
    LatentDynamics latent;
    latent.k = k;
    latent.initial = std::move(initial);
    latent.transitions.push_back(std::move(transition));
    const auto active = spec.active_indices();
    latent.modality_dists.resize(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s) {
        auto& per_var = latent.modality_dists[static_cast<std::size_t>(s)];
        per_var.resize(active.size());
        for (std::size_t v = 0; v < active.size(); ++v) {
            const int m = spec.variables[static_cast<std::size_t>(active[v])].modality_count;
            const int content = m - 1;  // last modality = "no answer"
            const int peak = (s + static_cast<int>(v)) % content;
            std::vector<double> dist(static_cast<std::size_t>(m),
                                     (1.0 - peak_mass) / (m - 1));
            dist[static_cast<std::size_t>(peak)] = peak_mass;
            per_var[v] = std::move(dist);
        }
    }
    latent.validate(spec);
    return latent;
}

SyntheticPanel generate_synthetic_panel(std::uint64_t seed, int n_individuals, int first_year,
                                        int last_year, const VariableSpec& spec,
                                        const LatentDynamics& latent) {
    spec.validate();
    latent.validate(spec);
    if (n_individuals < 0) throw InvalidSpecError("n_individuals must be non-negative");
    if (last_year - first_year < 2)
        throw InvalidSpecError("year range must span at least 3 years");

    const int n_pairs = last_year - first_year;
    if (latent.transitions.size() != 1 &&
        static_cast<int>(latent.transitions.size()) != n_pairs)
        throw InvalidSpecError("latent transitions must be a single matrix or one per year pair");
    auto matrix_for_pair = [&latent](int pair) -> const Eigen::MatrixXd& {
        return latent.transitions.size() == 1 ? latent.transitions.front()
                                              : latent.transitions[static_cast<std::size_t>(pair)];
    };

    const auto active = spec.active_indices();
    const auto supp = spec.supplementary_indices();
    const int window_choices = last_year - first_year - 1;  // window starts

    SyntheticPanel out;
    out.panel.spec = spec;
    out.panel.records.reserve(static_cast<std::size_t>(n_individuals) * 3);
    out.latent_segments.reserve(static_cast<std::size_t>(n_individuals) * 3);

    Rng rng(seed);
    char idbuf[32];
    for (int i = 0; i < n_individuals; ++i) {
        std::snprintf(idbuf, sizeof(idbuf), "ind%07d", i + 1);
        const int start =
            first_year + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(window_choices)));

        int state = static_cast<int>(rng.categorical(latent.initial));
        for (int t = 0; t < 3; ++t) {
            const int year = start + t;
            if (t > 0) {
                const Eigen::MatrixXd& P = matrix_for_pair(year - 1 - first_year);
                std::vector<double> row(static_cast<std::size_t>(latent.k));
                for (int j = 0; j < latent.k; ++j) row[static_cast<std::size_t>(j)] = P(state, j);
                state = static_cast<int>(rng.categorical(row));
            }

            PanelRecord rec;
            rec.individual_id = idbuf;
            rec.year = year;
            rec.answers.reserve(active.size());
            const auto& dists = latent.modality_dists[static_cast<std::size_t>(state)];
            for (std::size_t v = 0; v < active.size(); ++v)
                rec.answers.push_back(1 + static_cast<int>(rng.categorical(dists[v])));

            rec.supplementary.reserve(supp.size());
            for (std::size_t sv = 0; sv < supp.size(); ++sv) {
                const auto& var = spec.variables[static_cast<std::size_t>(supp[sv])];
                if (var.is_numeric()) {
                    rec.supplementary.push_back(static_cast<double>(state + 1) + rng.normal());
                } else if (!latent.supplementary_dists.empty() &&
                           !latent.supplementary_dists[static_cast<std::size_t>(state)][sv]
                                .empty()) {
                    rec.supplementary.push_back(1.0 + static_cast<double>(rng.categorical(
                                                          latent.supplementary_dists
                                                              [static_cast<std::size_t>(state)]
                                                              [sv])));
                } else {
                    rec.supplementary.push_back(1.0 + static_cast<double>(rng.uniform_below(
                                                          static_cast<std::uint64_t>(
                                                              var.modality_count))));
                }
            }
            out.panel.records.push_back(std::move(rec));
            out.latent_segments.push_back(state + 1);
        }
    }
    refresh_year_range(out.panel);
    return out;
}

} // namespace segtraj
