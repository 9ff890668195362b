"""Prepare the Brasília water-evaporation dataset from a BDMEP export.

The study data are n = 70 monthly observations from a monitoring station in
Brasília, Brazil, 2011-2016, distributed by the Meteorological Database for
Teaching and Research (BDMEP) of the Brazilian National Institute of
Meteorology (INMET). BDMEP requires (free) registration, so this repository
does not redistribute the series and there is no unauthenticated URL to pull
from; request the monthly station series for Brasília covering 2011-2016 at
https://bdmep.inmet.gov.br/ and feed the exported file to this script.

Expected monthly variables:

    response  t   total water evaporation (mm)
    covariate x1  actual evapotranspiration (mm)
    covariate x2  total insolation (h)
    covariate x3  cloudiness (tenths)
    covariate x4  relative humidity (%)

The script tolerates the common BDMEP export quirks (semicolon separators,
decimal commas, trailing empty column), drops rows with missing cells (the
2011-2016 window keeps 70 of the 72 calendar months), and writes
data/evaporation.csv in the layout the CLI examples and the test suite use.
A row count other than 70 is flagged loudly but still written, since column
naming in BDMEP exports has changed over time and partial pulls are easy to
produce by accident.

Until the real file is in place, data/evaporation_standin.csv (from
scripts/make_standin.py) offers a synthetic series with the same descriptive
profile for exercising the tooling.
"""

import argparse
import csv
import sys
from pathlib import Path

EXPECTED_N = 70
OUT_COLUMNS = ["t", "x1", "x2", "x3", "x4"]


def _parse_number(cell: str) -> float | None:
    cell = cell.strip()
    if not cell or cell.lower() in ("null", "na", "nan", "-"):
        return None
    return float(cell.replace(",", "."))


def _sniff_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    text = path.read_text(encoding="utf-8-sig")
    delimiter = ";" if text.count(";") > text.count(",") else ","
    rows = [r for r in csv.reader(text.splitlines(), delimiter=delimiter) if any(c.strip() for c in r)]
    if not rows:
        raise SystemExit(f"error: {path} is empty")
    header = [h.strip() for h in rows[0]]
    if header and not header[-1]:
        header = header[:-1]  # trailing empty column from a trailing separator
    return header, rows[1:]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="reshape a BDMEP monthly export into data/evaporation.csv"
    )
    parser.add_argument("export", help="CSV file exported from the BDMEP portal")
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "evaporation.csv"))
    for name, descr in zip(OUT_COLUMNS, (
        "water evaporation (mm)", "actual evapotranspiration (mm)",
        "total insolation (h)", "cloudiness (tenths)", "relative humidity (%)",
    )):
        parser.add_argument(f"--{name}-col", required=True, metavar="NAME",
                            help=f"export column holding {descr}")
    args = parser.parse_args(argv)

    path = Path(args.export)
    header, raw = _sniff_rows(path)
    wanted = [getattr(args, f"{name}_col") for name in OUT_COLUMNS]
    try:
        idx = [header.index(w) for w in wanted]
    except ValueError as exc:
        raise SystemExit(f"error: {exc}; export columns are: {', '.join(header)}")

    kept, dropped = [], 0
    for row in raw:
        vals = [_parse_number(row[j]) if j < len(row) else None for j in idx]
        if any(v is None for v in vals):
            dropped += 1
            continue
        if vals[0] <= 0.0:
            dropped += 1
            continue
        kept.append(vals)

    if len(kept) != EXPECTED_N:
        sys.stderr.write(
            f"WARNING: kept {len(kept)} rows but the study series has n={EXPECTED_N}; "
            f"check the station, window (2011-2016, monthly), and column mapping\n"
        )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OUT_COLUMNS)
        writer.writerows([repr(v) for v in row] for row in kept)
    print(f"wrote {out}: {len(kept)} rows kept, {dropped} dropped")
    return 0


if __name__ == "__main__":
    sys.exit(main())
