"""Regenerate the bundled sample CSVs (deterministic)."""

from pathlib import Path

from hydrotwin.config import ServiceConfig
from hydrotwin.datastore import historian_records_to_csv, weather_records_to_csv
from hydrotwin.sampledata import generate_sample_run


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "sample_data"
    out.mkdir(exist_ok=True)
    run = generate_sample_run(ServiceConfig(), history_days=10, future_weather_days=2, seed=7)
    (out / "historian.csv").write_text(historian_records_to_csv(run.historian), encoding="utf-8")
    (out / "weather.csv").write_text(weather_records_to_csv(run.weather), encoding="utf-8")
    print(f"wrote {len(run.historian)} historian rows and {len(run.weather)} weather rows to {out}")


if __name__ == "__main__":
    main()
