#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcpscope/common/http.hpp"
#include "mcpscope/model.hpp"
#include "mcpscope/provider.hpp"

namespace mcpscope::usage {

enum class Registry { npm, pypi };
std::string to_string(Registry r);
Registry parse_registry(std::string_view s);

struct PackageRef {
    Registry registry = Registry::npm;
    std::string name;

    auto operator<=>(const PackageRef&) const = default;
    [[nodiscard]] std::string str() const;  // "npm:@scope/name"
};

/// npm: optional "@scope/" then lowercase [a-z0-9._~-], at most 214 chars, no leading '.' or '_'.
/// pypi: [A-Za-z0-9._-], starting and ending alphanumeric.
bool valid_name(const PackageRef& p);

/// PyPI names compare case-insensitively with runs of "-_." folded to "-".
std::string canonical_name(Registry r, std::string_view name);

/// Packages named by install commands: npx, npm install / npm i, pip install (pip3,
/// python -m pip, uv pip), uv tool install, uvx (incl. --from). Version pins, extras and
/// quotes are stripped; flags, paths, URLs and VCS specs are skipped.
std::vector<PackageRef> harvest_install_commands(std::string_view readme);

struct UsageConfig {
    std::string npm_registry = "https://registry.npmjs.org";
    std::string npm_downloads = "https://api.npmjs.org/downloads/range";
    std::string pypi_json = "https://pypi.org/pypi";
    std::string pypi_stats = "https://pypistats.org/api/packages";
    fs::path cache_dir = "cache/downloads";
    Date fetch_date = parse_date("2026-03-01");
    YearMonth first = kSeriesOrigin;
    YearMonth last = kSeriesEnd;
    std::optional<fs::path> geo_file;  // CSV: package, month, country, downloads [, registry]

    static UsageConfig defaults() { return {}; }
};

/// Registry metadata lookups.
class PackageIndex {
public:
    PackageIndex(http::Client& client, UsageConfig cfg);
    virtual ~PackageIndex() = default;
    /// nullopt when the registry does not know the package. Throws RemoteError otherwise.
    virtual std::optional<Json> metadata(const PackageRef& p);
    /// Source repository declared by the package, if it names one on a code host.
    std::optional<RepoRef> repository(const PackageRef& p);

private:
    http::Client& client_;
    UsageConfig cfg_;
};

struct PackageIgnore {
    std::set<std::string> npm, pypi;
    static PackageIgnore load(const fs::path& asset_root = asset_dir());
    [[nodiscard]] bool contains(const PackageRef& p) const;
};

/// README install commands verified to exist, plus exact repository-name packages whose
/// metadata links back to the server's repository.
std::set<PackageRef> match_packages(const ServerRecord& server, PackageIndex& index, const PackageIgnore& ignore);

struct UsageJoin {
    std::map<std::string, std::set<PackageRef>> by_server;
    std::map<PackageRef, std::string> owner;  // package -> server id
    std::vector<std::string> conflicts;       // "<pkg> claimed by <a>, kept <b>"
    std::size_t matched_servers = 0;
    std::size_t matched_tools = 0;
};

/// Servers in the given order; a package claimed twice stays with the first server.
UsageJoin build_join(const std::vector<ServerRecord>& servers, PackageIndex& index, const PackageIgnore& ignore);

struct DownloadSeries {
    PackageRef package;
    std::map<YearMonth, std::int64_t> monthly;  // complete over the window
    std::vector<YearMonth> missing;             // months the source did not cover
    bool unknown = false;
};

/// One fetch per (package, window, fetch date). Raw responses are cached under
/// cfg.cache_dir; a cached key is answered without the network.
DownloadSeries fetch_downloads(const PackageRef& p, const UsageConfig& cfg, http::Client& client);

/// Daily rows from either registry's response body summed into the window's months.
DownloadSeries parse_downloads(const PackageRef& p, Registry shape, const std::string& body, int status,
                               const UsageConfig& cfg);

struct GeoDownloads {
    // package -> month -> country -> downloads
    std::map<PackageRef, std::map<YearMonth, std::map<std::string, std::int64_t>>> cells;
    /// (package, month) where countries sum above the monthly total.
    [[nodiscard]] std::vector<std::pair<PackageRef, YearMonth>> violations(
        const std::vector<DownloadSeries>& totals) const;
};

GeoDownloads load_geo_file(const fs::path& path);

// ---- aggregation ----

struct UsageRow {
    YearMonth month;
    std::string dimension;
    std::string category;
    double server_downloads = 0;
    double tool_uses = 0;
};

struct UsageTables {
    std::vector<UsageRow> rows;  // sorted by (month, dimension, category)
    std::map<YearMonth, double> total_downloads;
    std::map<YearMonth, double> total_tool_uses;
    std::map<std::string, double> server_totals;  // server id -> downloads over the window
};

inline const std::string kUnclassified = "unclassified";

/// Tool-level dimensions: direct_impact, functionality, domain, soc, stakes, action_space,
/// official_direct_impact (official servers only).
/// Server-level: generality (environment axis), industry_generality, server_direct_impact,
/// server_domain, server_soc, ai_coauthored, official, payments. Every server download counts
/// once as a use of each of its tools. A server counts as AI-coauthored from the month of its
/// first AI evidence onward. action_space categories overlap; their shares are taken over all
/// classified tool uses.
UsageTables aggregate_usage(const std::vector<ServerRecord>& servers,
                            const std::vector<ServerClassification>& classifications,
                            const std::vector<AiVerdict>& verdicts, const UsageJoin& join,
                            const std::vector<DownloadSeries>& series);

/// Share of classified mass (unclassified rows excluded from numerator and denominator).
std::map<std::string, double> shares(const UsageTables& t, YearMonth month, const std::string& dimension,
                                     bool tool_level = true);

std::string usage_csv(const UsageTables& t);
UsageTables read_usage_csv(const fs::path& path);

/// Per-server monthly downloads summed over its packages (both registries add).
std::map<std::string, std::map<YearMonth, std::int64_t>> server_series(const UsageJoin& join,
                                                                     const std::vector<DownloadSeries>& series,
                                                                     std::optional<Registry> only = std::nullopt);

// ---- concentration ----

struct Concentration {
    std::vector<double> ranked;      // descending
    std::vector<double> cumulative;  // share after each rank, in [0,1]
    std::map<double, std::pair<std::size_t, double>> top;  // p -> (servers included, share)
    bool undefined = false;          // all-zero total
};

Concentration concentration(std::vector<double> downloads, const std::vector<double>& ps = {0.01, 0.10});

// ---- geography ----

enum class Breadth { one_country, one_continent, worldwide };
std::string to_string(Breadth b);

struct GeoBreadth {
    Breadth breadth = Breadth::worldwide;
    std::string top_country;
    double top_country_share = 0;
    std::string top_continent;
    double top_continent_share = 0;
    std::map<std::string, double> country_shares;
};

/// ISO-3166 alpha-2 -> continent, from the shipped asset.
const std::map<std::string, std::string>& continents();

/// > 80% in one country is one_country; < 70% in every continent is worldwide.
/// Throws std::invalid_argument on a zero or negative total.
GeoBreadth geo_breadth(const std::map<std::string, double>& by_country);

}  // namespace mcpscope::usage
