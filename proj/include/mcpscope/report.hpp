#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mcpscope/analytics.hpp"
#include "mcpscope/common/io.hpp"
#include "mcpscope/model.hpp"
#include "mcpscope/usage.hpp"

namespace mcpscope::report {

/// Artifact name -> path in the run that holds it.
using Locate = std::function<fs::path(const std::string&)>;

struct OccupationLink {
    std::string task_id;
    std::string occupation_code;
    std::string occupation_title;
    std::optional<double> impact_score;
};

struct Inputs {
    std::vector<ServerRecord> servers;
    std::vector<ServerClassification> classifications;
    std::vector<AiVerdict> verdicts;
    usage::UsageTables usage;
    Table concentration;          // scope, rank, server_id, downloads, cumulative_share
    Table concentration_summary;  // scope, servers_n, top_1pct_n, ...
    Table geo_servers;            // usage_geo.csv
    Table geo_country;            // usage_geo_country.csv
    std::vector<OccupationLink> occupations;
    std::map<std::string, std::string> l1_names;  // id -> name
    Json fits;                                    // null until the fit stage ran
};

/// Reads what the fit and report stages need; fits.json only when `with_fits`.
Inputs load_inputs(const Locate& at, bool with_fits);

// ---- series ----

struct Series {
    std::vector<YearMonth> months;
    analytics::TimeSeries ts;  // t = month index from 2024-11
};

/// Monthly share of `category` within `dimension` over the window; months without
/// classified mass are left out. Weights are the month's downloads of servers classified
/// in that dimension.
Series share_series(const usage::UsageTables& t, const std::string& dimension, const std::string& category,
                    bool tool_level);

/// Monthly total of a category (or of all downloads when dimension is "total"); zero months left out.
Series downloads_series(const usage::UsageTables& t, const std::string& dimension, const std::string& category);

/// Share of servers created by each month's end that are general-purpose, weighted by
/// the cumulative server count. Servers without a creation date or classification are left out.
Series cumulative_general_share(const std::vector<ServerRecord>& servers,
                                const std::vector<ServerClassification>& classifications);

/// Share of servers created in each month with first-month AI evidence, weighted by the
/// month's new-server count.
Series first_month_ai_share(const std::vector<ServerRecord>& servers, const std::vector<AiVerdict>& verdicts);

struct StakesRow {
    std::string occupation_code;
    std::string occupation_title;
    double score = 0;
    double action_tools = 0;
};

/// Action tools per occupation (a tool counts once for each occupation its task links to).
/// Occupations without an impact score are left out.
std::vector<StakesRow> stakes_rows(const std::vector<ServerClassification>& classifications,
                                   const std::vector<OccupationLink>& links);

// ---- fits ----

struct FitSettings {
    std::uint64_t seed = 42;
    std::size_t n_boot = 1000;
    fs::path ratings_file;
};

/// fits.json: every trend model with its data, curve and intervals. A fit that cannot be
/// made is recorded with status "skipped" and its reason.
Json compute_fits(const Inputs& in, const FitSettings& settings);

// ---- reports ----

enum class Kind { domains, direct_impact, generality, geography, ai_coauthor, payments, stakes, concentration };

const std::vector<Kind>& all_kinds();
std::string to_string(Kind k);
Kind parse_kind(std::string_view name);

/// CSV tables (name -> contents) for one report kind. An empty slice gives header-only tables.
std::map<std::string, std::string> tables(const Inputs& in, Kind k);

/// Writes the kind's CSVs and its SVG chart into out_dir; returns the written files.
std::vector<fs::path> emit_report(const Inputs& in, Kind k, const fs::path& out_dir);

}  // namespace mcpscope::report
