#!/usr/bin/env python3
"""Writes the offline corpus: http/index.json, response bodies, geo.csv and ratings.csv.

Twenty listings across four sources: 3 duplicate listings, 2 zero-star repositories,
4 repositories that are not servers and 11 servers. Run from any directory.
"""

import calendar
import datetime as dt
import json
import pathlib
import urllib.parse

HERE = pathlib.Path(__file__).resolve().parent
HTTP = HERE / "http"
API = "https://api.github.com"
CUTOFF = "2025-10-01T00:00:00Z"
SEARCH_Q = '"mcp server" in:name,description,readme,topics'
AWESOME = "https://raw.githubusercontent.com/fixture-lists/awesome-mcp/main/README.md"
OFFICIAL = "https://raw.githubusercontent.com/modelcontextprotocol/servers/main/README.md"
REGISTRY = "https://registry.smithery.ai"
FIRST, LAST = (2024, 11), (2026, 2)


def enc(s):
    return urllib.parse.quote(s, safe="-_.~")


def months():
    y, m = FIRST
    while (y, m) <= LAST:
        yield y, m
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)


def ts(d):
    return d.strftime("%Y-%m-%dT%H:%M:%SZ")


# ---- servers ----------------------------------------------------------------

SERVERS = [
    dict(full="acme/files-mcp-server", created="2024-12-05", stars=410,
         desc="MCP server for local file system access",
         readme="""# files-mcp-server

An MCP server that gives agents access to local files on any directory you allow.

## Installation

```bash
npx -y @acme/files-mcp
```

## Tools

- `read_file`: Read the contents of a file
- `write_file`: Write content to a file, replacing it
- `list_directory`: List entries in a directory
- `move_file`: Move or rename a file
""",
         package=("npm", "@acme/files-mcp"), base=900, growth=1.25,
         geo={"US": 0.40, "DE": 0.20, "IN": 0.20, "BR": 0.20},
         ai=dict(kind="dependabot")),
    dict(full="bolt/weather-mcp", created="2025-01-10", stars=85,
         desc="Weather forecasts as an MCP server",
         readme="""# weather-mcp

MCP server with forecasts and alerts from the national weather service.

## Install

```
uvx weather-mcp
```

## Tools

- `get_forecast`: Get the forecast for a latitude and longitude
- `get_alerts`: Get active weather alerts for a state
""",
         package=("pypi", "weather-mcp"), base=500, growth=1.20,
         geo={"US": 0.90, "DE": 0.10}, ai=dict(kind="none")),
    dict(full="cobalt/shell-runner-mcp", created="2025-02-14", stars=230,
         desc="Run shell commands from an agent",
         readme="""# shell-runner-mcp

MCP server that runs arbitrary shell commands in a terminal session.

## Setup

`npm install -g shell-runner-mcp`

## Tools

- `run_command`: Execute a shell command and return its output
- `read_output`: Read buffered output of a running command
- `kill_process`: Terminate a running process by PID
""",
         package=("npm", "shell-runner-mcp"), base=700, growth=1.22,
         geo={"US": 0.30, "CN": 0.30, "DE": 0.20, "BR": 0.20}, ai=dict(kind="none")),
    dict(full="delta/asher-mcp", created="2025-03-03", stars=40,
         desc="Financial data aggregation MCP server",
         readme="""# asher-mcp

Financial data aggregation MCP tool.

## Installation

```
pip install asher-mcp
```

## Tools

- get_accounts: Retrieve list of all connected bank accounts
- get_account_balance: Get current balance for a specific account
- get_transactions: Retrieve transaction history for an account
""",
         package=("pypi", "asher-mcp"), base=300, growth=1.18,
         geo={"US": 0.60, "CA": 0.25, "MX": 0.15}, ai=dict(kind="none")),
    dict(full="echo/base-mcp", created="2025-04-20", stars=150,
         desc="Blockchain interaction tool for Base network, an MCP server",
         readme="""# base-mcp

Blockchain interaction tool for Base network. MCP server.

## Tools

- get_balance: Check wallet balance
- get_transaction: Retrieve transaction details
- send_transaction: Send ETH or tokens
- deploy_contract: Deploy smart contracts
- interact_contract: Call contract functions
- estimate_gas: Calculate gas fees

## Required inputs

- private_key: Wallet private key
- rpc_endpoint: Base network RPC URL

## Usage

```
npx base-mcp
```
""",
         package=("npm", "base-mcp"), base=600, growth=1.25,
         geo={"US": 0.35, "SG": 0.35, "GB": 0.30}, ai=dict(kind="none")),
    dict(full="foxtrot/stats-mcp", created="2025-05-08", stars=22,
         desc="Statistics helpers as an MCP server",
         readme="""# stats-mcp

MCP server for quick descriptive statistics.

## Tools

- `calculate_statistics`: Compute mean, median and spread of a column
- `plan_analysis`: Plan the steps of an analysis from a question
- `summarize_table`: Summarize a table of values

Run it with `npx stats-mcp`.
""",
         package=("npm", "stats-mcp"), base=200, growth=1.15,
         geo={"IN": 0.85, "US": 0.15}, ai=dict(kind="none")),
    dict(full="golf/browser-pilot-mcp", created="2025-06-15", stars=520,
         desc="Browser automation MCP server built on playwright",
         readme="""# browser-pilot-mcp

MCP server for browser automation with playwright.

## Tools

- `navigate_page`: Open a URL in the browser
- `click_element`: Click an element on the page
- `take_screenshot`: Capture a screenshot of the page
- `fill_form`: Fill the fields of a form

## Install

```
npx -y browser-pilot-mcp
```
""",
         package=("npm", "browser-pilot-mcp"), base=1500, growth=1.30,
         geo={"US": 0.30, "JP": 0.30, "DE": 0.20, "BR": 0.20},
         ai=dict(kind="config", path="CLAUDE.md", days=3)),
    dict(full="hotel/trade-desk-mcp", created="2025-07-01", stars=17,
         desc="Brokerage trading desk MCP server",
         readme="""# trade-desk-mcp

MCP server for a brokerage trading desk.

## Tools

- execute_trade: Place a buy or sell order for a stock
- get_quote: Get the latest quote for a ticker

Install with `uvx trade-desk-mcp`.
""",
         package=("pypi", "trade-desk-mcp"), base=150, growth=1.20,
         geo={"US": 0.75, "GB": 0.25}, ai=dict(kind="none")),
    dict(full="india/notes-mcp", created="2025-08-12", stars=64,
         desc="Notes MCP server",
         readme="""# notes-mcp

MCP server for a personal notes vault.

## Tools

- `create_note`: Create a note with a title and body
- `search_notes`: Search notes by keyword
- `delete_note`: Delete a note by id

```json
{"mcpServers": {"notes": {"command": "npx", "args": ["-y", "@india/notes-mcp"]}}}
```
""",
         package=("npm", "@india/notes-mcp"), base=250, growth=1.20,
         geo={"FR": 0.50, "DE": 0.30, "US": 0.20},
         ai=dict(kind="coauthor", days=5)),
    dict(full="juliet/python-sandbox-mcp", created="2025-11-03", stars=95,
         desc="Sandboxed python execution MCP server",
         readme="""# python-sandbox-mcp

MCP server to execute python code in a sandbox.

## Tools

- `run_python_code`: Run python code in a sandbox and return stdout

`pipx install python-sandbox-mcp`
""",
         package=("pypi", "python-sandbox-mcp"), base=400, growth=1.35,
         geo={"US": 0.45, "IN": 0.30, "DE": 0.25},
         ai=dict(kind="config", path=".cursorrules", days=45)),
    dict(full="kilo/calendar-mcp", created="2026-01-05", stars=12,
         desc="Calendar MCP server",
         readme="""# calendar-mcp

MCP server for calendars.

## Tools

- `list_events`: List events in a date range
- `create_event`: Create a calendar event
- `plan_schedule`: Plan a schedule for a list of tasks

`npx calendar-mcp`
""",
         package=("npm", "calendar-mcp"), base=300, growth=1.40,
         geo={"US": 0.50, "CA": 0.30, "GB": 0.20},
         ai=dict(kind="bot", login="copilot-swe-agent[bot]", days=2)),
]

NON_SERVERS = [
    dict(full="lima/awesome-mcp-server-list", created="2025-02-01", stars=300,
         desc="A curated mcp server list",
         readme="""# Awesome MCP server list

- [files](https://github.com/acme/files-mcp-server)
- [weather](https://github.com/bolt/weather-mcp)
"""),
    dict(full="mike/mcp-server-notes", created="2025-03-01", stars=9,
         desc="Notes about writing an mcp server",
         readme="""# Notes on MCP

How the protocol frames requests and responses, with diagrams.
"""),
    dict(full="november/tool-kit", created="2025-05-01", stars=31,
         desc="Command line helpers",
         readme="""# tool-kit

## Tools

- `format_disk`: Format a disk
- `list_disks`: List disks
"""),
    dict(full="oscar/mcp-tutorial", created="2025-06-01", stars=44,
         desc="Tutorial for the model context protocol",
         readme="""# MCP tutorial

Step one: read the specification. Step two: write a hello world.
"""),
]

ZERO_STAR = [
    dict(full="papa/empty-mcp", created="2025-04-01", stars=0, desc="placeholder"),
    dict(full="quebec/stub-mcp", created="2025-05-01", stars=0, desc="placeholder"),
]

BY_NAME = {r["full"]: r for r in SERVERS + NON_SERVERS + ZERO_STAR}

SEARCH = ["acme/files-mcp-server", "bolt/weather-mcp", "delta/asher-mcp", "echo/base-mcp",
          "foxtrot/stats-mcp", "golf/browser-pilot-mcp", "lima/awesome-mcp-server-list", "mike/mcp-server-notes"]
SMITHERY = ["bolt/weather-mcp", "cobalt/shell-runner-mcp", "hotel/trade-desk-mcp",
            "november/tool-kit"]
OFFICIAL_LIST = ["acme/files-mcp-server", "india/notes-mcp", "juliet/python-sandbox-mcp"]
AWESOME_LIST = ["cobalt/shell-runner-mcp", "kilo/calendar-mcp", "oscar/mcp-tutorial", "papa/empty-mcp",
                "quebec/stub-mcp"]

index = {}


def put_json(url, body, status=200):
    index[url] = {"status": status, "json": body}


def put_file(url, rel, text, status=200):
    path = HTTP / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    index[url] = {"status": status, "file": rel}


def created(r):
    return dt.datetime.fromisoformat(r["created"]).replace(tzinfo=dt.timezone.utc)


def repo_meta(r):
    return {"full_name": r["full"], "html_url": "https://github.com/" + r["full"],
            "stargazers_count": r["stars"], "created_at": ts(created(r)),
            "description": r["desc"], "topics": []}


# ---- discovery ----------------------------------------------------------------

put_json(f"{API}/search/repositories?q={enc(SEARCH_Q)}&per_page=100&page=1",
         {"total_count": len(SEARCH), "items": [repo_meta(BY_NAME[f]) for f in SEARCH]})
put_json(f"{REGISTRY}/servers?page=1&pageSize=100",
         {"servers": [{"qualifiedName": f.split("/")[1], "repository": "https://github.com/" + f,
                       "description": BY_NAME[f]["desc"]} for f in SMITHERY],
          "pagination": {"totalPages": 1, "totalCount": len(SMITHERY)}})
put_file(OFFICIAL, "lists/official.md",
         "# Reference servers\n\n" + "".join(f"- [{f}](https://github.com/{f})\n" for f in OFFICIAL_LIST))
put_file(AWESOME, "lists/awesome.md",
         "# Awesome MCP\n\n[source](https://github.com/fixture-lists/awesome-mcp)\n\n"
         + "".join(f"- [{f}](https://github.com/{f}) - community server\n" for f in AWESOME_LIST))

for r in SERVERS + NON_SERVERS + ZERO_STAR:
    put_json(f"{API}/repos/{r['full']}", repo_meta(r))

# ---- snapshots ----------------------------------------------------------------

for r in SERVERS + NON_SERVERS:
    owner, name = r["full"].split("/")
    rel = f"readmes/{owner}__{name}.md"
    if created(r) < dt.datetime.fromisoformat("2025-10-01").replace(tzinfo=dt.timezone.utc):
        sha = f"snap{owner}{name}".replace("-", "")
        put_json(f"{API}/repos/{r['full']}/commits?until={enc(CUTOFF)}&per_page=1", [{"sha": sha}])
        put_file(f"{API}/repos/{r['full']}/readme?ref={enc(sha)}", rel, r["readme"])
    else:
        put_file(f"{API}/repos/{r['full']}/readme", rel, r["readme"])

# ---- authorship activity ------------------------------------------------------


def commit(sha, login, message, when):
    return {"sha": sha, "author": {"login": login},
            "commit": {"message": message, "author": {"date": ts(when)}}}


for r in SERVERS:
    full = r["full"]
    c0 = created(r)
    ai = r["ai"]
    human = full.split("/")[0] + "-dev"
    commits = [commit("c1", human, "Initial commit", c0 + dt.timedelta(hours=1)),
               commit("c2", human, "Add tools", c0 + dt.timedelta(days=10))]
    tree = ["README.md", "package.json", "src/index.ts"]
    first_tree = ["README.md", "src/index.ts"]
    if ai["kind"] == "dependabot":
        commits.append(commit("c3", "dependabot[bot]", "Bump zod from 3.22 to 3.23", c0 + dt.timedelta(days=8)))
    elif ai["kind"] == "coauthor":
        commits.append(commit("c3", human, "Add search\n\nCo-Authored-By: Claude <noreply@anthropic.com>",
                              c0 + dt.timedelta(days=ai["days"])))
    elif ai["kind"] == "bot":
        commits.append(commit("c3", ai["login"], "Add planning tool", c0 + dt.timedelta(days=ai["days"])))
    elif ai["kind"] == "config":
        tree.append(ai["path"])
        when = c0 + dt.timedelta(days=ai["days"])
        if ai["days"] <= 30:
            first_tree.append(ai["path"])
        commits.append(commit("c3", human, f"Add {ai['path']}", when))
        put_json(f"{API}/repos/{full}/commits?path={enc(ai['path'])}&per_page=100&page=1",
                 [commit("c3", human, f"Add {ai['path']}", when)])
    commits.sort(key=lambda c: c["commit"]["author"]["date"], reverse=True)
    put_json(f"{API}/repos/{full}/commits?per_page=100&page=1", commits)
    put_json(f"{API}/repos/{full}/pulls?state=all&sort=created&direction=desc&per_page=30", [])
    put_json(f"{API}/repos/{full}/git/trees/HEAD?recursive=1",
             {"tree": [{"path": p, "type": "blob"} for p in tree], "truncated": False})
    fm = f"fm{full.replace('/', '').replace('-', '')}"
    until = c0 + dt.timedelta(days=30)
    put_json(f"{API}/repos/{full}/commits?until={enc(ts(until))}&per_page=1", [{"sha": fm}])
    put_json(f"{API}/repos/{full}/git/trees/{fm}?recursive=1",
             {"tree": [{"path": p, "type": "blob"} for p in first_tree], "truncated": False})

# ---- packages and downloads ---------------------------------------------------


def monthly_downloads(r):
    c = created(r)
    out = {}
    for y, m in months():
        age = (y - c.year) * 12 + (m - c.month)
        out[(y, m)] = 0 if age < 0 else int(round(r["base"] * r["growth"] ** age))
    return out


geo_rows = []
for r in SERVERS:
    reg, pkg = r["package"]
    repo_url = "https://github.com/" + r["full"]
    series = monthly_downloads(r)
    if reg == "npm":
        put_json(f"https://registry.npmjs.org/{pkg.replace('/', '%2F')}",
                 {"name": pkg, "repository": {"type": "git", "url": f"git+{repo_url}.git"}})
        days = []
        for (y, m), total in series.items():
            n = calendar.monthrange(y, m)[1]
            for d in range(1, n + 1):
                share = total // n + (1 if d <= total % n else 0)
                days.append({"day": f"{y:04d}-{m:02d}-{d:02d}", "downloads": share})
        body = {"start": "2024-11-01", "end": "2026-02-28", "package": pkg, "downloads": days}
        put_file(f"https://api.npmjs.org/downloads/range/2024-11-01:2026-02-28/{pkg}",
                 f"downloads/npm__{pkg.replace('/', '__').replace('@', '')}.json", json.dumps(body))
    else:
        put_json(f"https://pypi.org/pypi/{pkg}/json",
                 {"info": {"name": pkg, "project_urls": {"Source": repo_url}, "home_page": ""}})
        data = []
        for (y, m), total in series.items():
            if total == 0:
                continue
            n = calendar.monthrange(y, m)[1]
            for d in range(1, n + 1):
                share = total // n + (1 if d <= total % n else 0)
                date = f"{y:04d}-{m:02d}-{d:02d}"
                data.append({"category": "with_mirrors", "date": date, "downloads": share + 3})
                data.append({"category": "without_mirrors", "date": date, "downloads": share})
        canon = pkg.lower()
        put_file(f"https://pypistats.org/api/packages/{canon}/overall?mirrors=false",
                 f"downloads/pypi__{canon}.json",
                 json.dumps({"data": data, "package": canon, "type": "overall_downloads"}))
    for (y, m), total in series.items():
        if total == 0:
            continue
        for country, share in r["geo"].items():
            geo_rows.append((pkg, f"{y:04d}-{m:02d}", country, int(total * share), reg))

with open(HERE / "geo.csv", "w") as f:
    f.write("package,month,country,downloads,registry\n")
    for row in geo_rows:
        f.write(",".join(str(x) for x in row) + "\n")

# Ten items, three raters; the hand-computed kappa appears in the acceptance test.
RATINGS = [
    ("t01", ["1.1", "1.1", "1.1"]), ("t02", ["2.2", "2.2", "2.2"]), ("t03", ["3.4", "3.4", "3.4"]),
    ("t04", ["1.1", "1.1", "2.2"]), ("t05", ["3.3", "3.3", "3.3"]), ("t06", ["2.1", "2.2", "2.1"]),
    ("t07", ["1.1", "1.1", "1.1"]), ("t08", ["3.4", "3.3", "3.4"]), ("t09", ["2.2", "2.2", "2.2"]),
    ("t10", ["1.1", "1.1", "1.1"]),
]
with open(HERE / "ratings.csv", "w") as f:
    f.write("item,rater,label\n")
    for item, labels in RATINGS:
        for i, label in enumerate(labels):
            f.write(f"{item},r{i + 1},{label}\n")

HTTP.mkdir(exist_ok=True)
(HTTP / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
print(f"{len(index)} responses, {len(geo_rows)} geo rows")
