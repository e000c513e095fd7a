"""Three users deposit ETH, the operator disappears, and everyone escapes.

Runs the bundled ``eth-escape`` scenario and walks through the report.
"""

from escape_sim import load_fixture, run_scenario

E = 10**18

scenario = load_fixture("eth-escape")
report = run_scenario(scenario)

for action in report.actions:
    line = f"t={action['at']:>7}  {action['action']:<18} {action['status']}"
    payouts = action.get("detail", {}).get("payouts") if isinstance(action.get("detail"), dict) else None
    if payouts:
        line += "  paid " + ", ".join(f"{int(p['amount']) / E:g} ETH" for p in payouts)
    print(line)

eth = report.conservation["ETH"]
print(f"deposited {eth['deposited'] / E:g} ETH, paid {eth['paid'] / E:g} ETH, left in escrow {eth['escrow']}")
print("scenario passed:", report.passed)
