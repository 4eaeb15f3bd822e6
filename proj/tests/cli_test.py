"""Exit codes and outputs of the atmsim command-line tool.

usage: cli_test.py <atmsim binary> <scenario dir>
"""

import json
import os
import subprocess
import sys
import tempfile

BIN = sys.argv[1]
SCENARIOS = sys.argv[2]
failures = []


def run(*args):
    p = subprocess.run([BIN, *args], capture_output=True, text=True)
    return p.returncode, p.stdout, p.stderr


def check(name, cond, info=""):
    print(("ok   " if cond else "FAIL ") + name + (f"  [{info}]" if info and not cond else ""))
    if not cond:
        failures.append(name)


def cell_line(t, port=0):
    header = "00 00 00 00 55"
    return f"{t!r} {port} {header} " + " ".join(["00"] * 48)


def write(path, text):
    with open(path, "w") as f:
        f.write(text)


tmp = tempfile.mkdtemp(prefix="atmsim_cli_")

# hec
code, out, _ = run("hec", "00000000")
check("hec of zero prefix", code == 0 and out.strip() == "55", out)
code, out, _ = run("hec", "12345678")
check("hec golden", code == 0 and out.strip() == "49", out)
code, out, _ = run("hec", "0123456")
check("hec odd length exits 2", code == 2)
code, out, _ = run("hec", "zz000000")
check("hec bad digits exits 2", code == 2)

# usage
code, _, _ = run()
check("no subcommand exits 2", code == 2)
code, _, _ = run("frobnicate")
check("unknown subcommand exits 2", code == 2)

# run / validate
code, _, _ = run("run", os.path.join(tmp, "missing.json"))
check("missing scenario exits 2", code == 2)

bad = {
    "duration_s": 0.1,
    "nodes": [{"name": "a", "type": "host"}, {"name": "b", "type": "host"}],
    "links": [{"a": "a", "b": "b", "bit_rate": 1e7}],
    "connections": [{"id": "c", "category": "CBR", "descriptor": {"pcr": 1000, "mcr": 10, "cdvt": 1e-4},
                     "route": ["a", "b"]}],
    "generators": [{"connection": "c", "type": "paced_cbr", "rate": 1000}],
}
write(os.path.join(tmp, "bad.json"), json.dumps(bad))
code, out, err = run("run", os.path.join(tmp, "bad.json"), "--out", os.path.join(tmp, "bad_out"))
check("CBR with MCR exits 1", code == 1, f"{code}")
check("CBR with MCR cites the rule", "MCR not applicable" in out + err, out + err)
code, out, _ = run("validate", os.path.join(tmp, "bad.json"))
check("validate reports the violation", code == 1 and "MCR not applicable" in out, out)

write(os.path.join(tmp, "broken.json"), "{ not json")
code, _, _ = run("validate", os.path.join(tmp, "broken.json"))
check("unparsable scenario exits 1", code == 1)

code, out, _ = run("validate", os.path.join(SCENARIOS, "reference.json"))
check("reference validates", code == 0 and out.strip() == "ok", out)

out_dir = os.path.join(tmp, "single")
code, out, _ = run("run", os.path.join(SCENARIOS, "single_hop_cbr.json"), "--out", out_dir)
check("single hop runs", code == 0)
for f in ("report.json", "connections.csv", "switches.csv", "links.csv"):
    check(f"single hop writes {f}", os.path.exists(os.path.join(out_dir, f)))
fields = out.split()
check("summary line format", len(fields) == 5 and fields[1] == "CBR" and fields[2] == "clr=0"
      and fields[3].startswith("mean_ctd=") and fields[4].startswith("cdv="), out)

a, b = os.path.join(tmp, "ref_a"), os.path.join(tmp, "ref_b")
run("run", os.path.join(SCENARIOS, "reference.json"), "--out", a)
run("run", os.path.join(SCENARIOS, "reference.json"), "--out", b)
with open(os.path.join(a, "report.json"), "rb") as fa, open(os.path.join(b, "report.json"), "rb") as fb:
    check("reports byte-identical", fa.read() == fb.read())
run("run", os.path.join(SCENARIOS, "reference.json"), "--out", b, "--seed", "43")
with open(os.path.join(a, "report.json"), "rb") as fa, open(os.path.join(b, "report.json"), "rb") as fb:
    check("--seed changes the report", fa.read() != fb.read())

# conformance
paced = os.path.join(tmp, "paced.txt")
write(paced, "\n".join(cell_line(k / 1000.0) for k in range(500)) + "\n")
code, out, _ = run("conformance", paced, "--pcr", "1000")
check("paced trace conforms", code == 0 and "conforming 500" in out and "non-conforming 0" in out, out)

burst = os.path.join(tmp, "burst.txt")
write(burst, "\n".join(cell_line(k / 1000.0) for k in range(6)) + "\n")
code, out, _ = run("conformance", burst, "--pcr", "1000", "--scr", "100", "--mbs", "5")
check("MBS+1 burst has one violation", code == 1 and "non-conforming 1" in out and "line 6 " in out, out)

empty = os.path.join(tmp, "empty.txt")
write(empty, "")
code, out, _ = run("conformance", empty, "--pcr", "1000")
check("empty trace is 0/0", code == 0 and "conforming 0" in out and "non-conforming 0" in out, out)

malformed = os.path.join(tmp, "malformed.txt")
write(malformed, cell_line(0.0) + "\n0.001 0 zz\n")
code, _, err = run("conformance", malformed, "--pcr", "1000")
check("malformed trace exits 2 naming the line", code == 2 and "line 2" in err, err)

code, _, _ = run("conformance", burst, "--pcr", "1000", "--scr", "100")
check("--scr without --mbs exits 2", code == 2)
code, _, _ = run("conformance", os.path.join(tmp, "nope.txt"), "--pcr", "1000")
check("missing trace exits 2", code == 2)

# traces written by run feed the conformance checker
traced = {
    "duration_s": 0.5,
    "seed": 3,
    "nodes": [{"name": "a", "type": "host"}, {"name": "b", "type": "host"}],
    "links": [{"a": "a", "b": "b", "bit_rate": 1e7, "propagation_delay_s": 0.001}],
    "connections": [{"id": "c", "category": "CBR", "descriptor": {"pcr": 2000, "cdvt": 1e-4},
                     "route": ["a", "b"], "trace": True}],
    "generators": [{"connection": "c", "type": "paced_cbr", "rate": 2000}],
}
write(os.path.join(tmp, "traced.json"), json.dumps(traced))
trace_dir = os.path.join(tmp, "traced_out")
code, _, _ = run("run", os.path.join(tmp, "traced.json"), "--out", trace_dir)
trace_file = os.path.join(trace_dir, "trace_c.txt")
check("traced run writes a trace", code == 0 and os.path.exists(trace_file))
if os.path.exists(trace_file):
    code, out, _ = run("conformance", trace_file, "--pcr", "2000", "--cdvt", "1e-4")
    check("emitted trace conforms to its contract", code == 0 and "non-conforming 0" in out, out)

if failures:
    print(f"{len(failures)} CLI check(s) failed")
    sys.exit(1)
print("all CLI checks passed")
