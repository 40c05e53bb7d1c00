#!/usr/bin/env python3
"""Convert the public sushi preference data (sushi3a.5000.10.order and
sushi3.udata) into a rankda dataset over Anago, Maguro, Toro and Tekka Maki
with gender x region x age categories.

Each full ranking of the ten sushis is restricted to the four fish sushis;
the induced order gives the ranks r1..r4 in the item order of the schema.
"""

import argparse
import json
from pathlib import Path

# Item ids in sushi3a.
ITEMS = [("anago", 1), ("maguro", 2), ("toro", 8), ("tekka_maki", 9)]
GENDERS = {"0": "male", "1": "female"}
AGES = {"0": "15-19", "1": "20-29", "2": "30-39", "3": "40-49", "4": "50-59", "5": "60+"}
REGIONS = {"0": "east", "1": "west"}
# Column of the east/west flag in sushi3.udata.
REGION_COLUMN = {"until15": 6, "current": 9}


def read_orders(path):
    lines = Path(path).read_text().split("\n")
    orders = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if not fields:
            continue
        length = int(fields[1])
        order = [int(x) for x in fields[2:]]
        if len(order) != length:
            raise SystemExit(f"{path} line {number}: expected {length} items, found {len(order)}")
        orders.append(order)
    return orders


def read_users(path, region_column):
    users = []
    for number, line in enumerate(Path(path).read_text().split("\n"), start=1):
        fields = line.split()
        if not fields:
            continue
        try:
            users.append((GENDERS[fields[1]], REGIONS[fields[region_column]], AGES[fields[2]]))
        except (KeyError, IndexError):
            raise SystemExit(f"{path} line {number}: unexpected attribute values")
    return users


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", required=True, help="sushi3a.5000.10.order")
    ap.add_argument("--users", required=True, help="sushi3.udata")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--region", choices=sorted(REGION_COLUMN), default="until15",
                    help="east/west flag: residence until age 15 (default) or current residence")
    args = ap.parse_args()

    orders = read_orders(args.order)
    users = read_users(args.users, REGION_COLUMN[args.region])
    if len(orders) != len(users):
        raise SystemExit(f"{len(orders)} rankings but {len(users)} users")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schema = {
        "items": [name for name, _ in ITEMS],
        "factors": [
            {"name": "gender", "levels": list(GENDERS.values())},
            {"name": "region", "levels": list(REGIONS.values())},
            {"name": "age", "levels": list(AGES.values())},
        ],
    }
    (out / "sushi_schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    with open(out / "sushi.csv", "w") as f:
        f.write("gender,region,age," + ",".join(f"r{i + 1}" for i in range(len(ITEMS))) + "\n")
        for order, (gender, region, age) in zip(orders, users):
            sub = [item for item in order if item in {sid for _, sid in ITEMS}]
            ranks = [sub.index(sid) + 1 for _, sid in ITEMS]
            f.write(f"{gender},{region},{age}," + ",".join(map(str, ranks)) + "\n")
    print(f"wrote {len(orders)} rows to {out / 'sushi.csv'}")


if __name__ == "__main__":
    main()
