import argparse
import os
import sys
import time

# Add parent directory to path to import the tastewalk package
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from tastewalk import tsv
from tastewalk.builder import build_taste_graph
from tastewalk.config import Settings
from tastewalk.simulator import (WorldConfig, compare_main_page, generate_world,
                                 personalized_page, replay_main_page)


def fmt(value):
    return "undefined" if value is None else f"{value:.3f}"


def run(cfg, settings, events_path=None):
    print(f"Generating world: {cfg.users} users, seed {cfg.seed}...")
    world = generate_world(cfg)

    print("Building taste graph...")
    start = time.time()
    graph = build_taste_graph(world.log, world.catalog, world.playlists, world.today, settings.builder)
    print(f"  {graph!r} in {time.time() - start:.2f}s")

    print(f"Replaying main page (pool {cfg.pool}, page {cfg.page_size})...")
    reports = compare_main_page(world, settings, cfg, graph)

    print("\n" + "=" * 60)
    print(f"{'Indicator':<30} | {'Personalized':>12} | {'Global top':>12}")
    print("-" * 60)
    for name in ("playbacks_main_vs_mymusic", "likes_main_vs_mymusic", "playbacks_per_click"):
        p = getattr(reports["personalized"], name)
        b = getattr(reports["baseline"], name)
        print(f"{name:<30} | {fmt(p):>12} | {fmt(b):>12}")
    print("=" * 60)

    p = reports["personalized"].playbacks_main_vs_mymusic
    b = reports["baseline"].playbacks_main_vs_mymusic
    if p is not None and b:
        print(f"Main page playback lift: {p / b:.2f}x")

    if events_path:
        events = replay_main_page(world, personalized_page(world, graph, settings, cfg), cfg, cfg.seed + 1)
        tsv.write_tagged_events(events_path, events)
        print(f"Personalized tagged events written to {events_path}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Compare a personalized main page with the global top list on a synthetic world.")
    parser.add_argument("--users", type=int, default=500, help="Number of users")
    parser.add_argument("--seed", type=int, default=0, help="Random seed")
    parser.add_argument("--pool", type=int, default=100, help="Top-rated pool the page is chosen from")
    parser.add_argument("--page", type=int, default=20, help="Items shown per page")
    parser.add_argument("--config", default=None, help="Settings file")
    parser.add_argument("--events", default=None, help="Write the personalized tagged events to this TSV")

    args = parser.parse_args()

    settings = Settings.load(args.config) if args.config else Settings()
    cfg = WorldConfig(users=args.users, seed=args.seed, pool=args.pool, page_size=args.page, progress=True)
    run(cfg, settings, args.events)
