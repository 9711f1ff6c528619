import argparse
import os
import sys

# Add parent directory to path to import the tastewalk package
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from tastewalk import tsv
from tastewalk.simulator import WorldConfig, generate_world


def write_world(output_dir, cfg):
    """Writes a synthetic two-genre world as the TSV inputs of `tastewalk build`."""
    print(f"Generating world: {cfg.users} users, seed {cfg.seed}...")
    world = generate_world(cfg)
    os.makedirs(output_dir, exist_ok=True)

    paths = {name: os.path.join(output_dir, f"{name}.tsv")
             for name in ("plays", "catalog", "ratings", "playlists", "demography")}
    tsv.write_playback_log(paths["plays"], world.log)
    tsv.write_catalog(paths["catalog"], paths["ratings"], world.catalog)
    tsv.write_playlists(paths["playlists"], world.playlists)
    tsv.write_demography(paths["demography"], world.demography)

    print(f"  {len(world.log)} plays, {len(world.catalog)} tracks")
    for name, path in paths.items():
        print(f"  {name:<11} -> {path}")
    print(f"Reference date for build/boost: {world.today.isoformat()}")
    print("Done.")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Generate a synthetic listening world as TSV files.")

    script_dir = os.path.dirname(os.path.abspath(__file__))
    project_root = os.path.dirname(script_dir)

    parser.add_argument("--output-dir", default=os.path.join(project_root, 'data', 'synthetic'), help="Directory for the TSV files")
    parser.add_argument("--users", type=int, default=500, help="Number of users")
    parser.add_argument("--plays", type=int, default=40, help="History plays per user")
    parser.add_argument("--purity", type=float, default=0.95, help="Share of plays in the user's own genre")
    parser.add_argument("--seed", type=int, default=0, help="Random seed")

    args = parser.parse_args()

    cfg = WorldConfig(users=args.users, history_plays=args.plays, purity=args.purity, seed=args.seed, progress=True)
    write_world(args.output_dir, cfg)
