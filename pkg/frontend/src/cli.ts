#!/usr/bin/env node
/** figgen <spec-file>
 *
 * The spec file uses the project's INI format; each [figure*] section
 * names a kind, an input CSV and an output SVG (paths relative to the
 * spec file):
 *
 *   [figure welfare]
 *   kind = welfare_vs_irc
 *   input = sweep_out/welfare_vs_irc.csv
 *   output = fig_welfare.svg
 *   title = expected welfare vs IRc
 */

import * as path from "node:path";
import * as fs from "node:fs";

import { parseIni } from "./ini";
import { FigureKind, PlotSpec, render } from "./render";

const KINDS: FigureKind[] = ["welfare_vs_irc", "wr_vs_epsbar", "gap_vs_T"];

export function specsFromFile(specPath: string): PlotSpec[] {
  const text = fs.readFileSync(specPath, "utf8");
  const sections = parseIni(text);
  const base = path.dirname(path.resolve(specPath));
  const specs: PlotSpec[] = [];
  for (const [name, section] of sections) {
    if (!(name === "figure" || name.startsWith("figure "))) {
      continue;
    }
    const kind = section.get("kind");
    const input = section.get("input");
    const output = section.get("output");
    if (!kind || !input || !output) {
      throw new Error(`section [${name}] needs kind, input and output`);
    }
    if (!KINDS.includes(kind as FigureKind)) {
      throw new Error(
        `section [${name}]: unknown kind '${kind}'; expected one of ${KINDS.join(", ")}`,
      );
    }
    specs.push({
      kind: kind as FigureKind,
      input: path.resolve(base, input),
      output: path.resolve(base, output),
      title: section.get("title"),
    });
  }
  if (specs.length === 0) {
    throw new Error(`${specPath}: no [figure] sections found`);
  }
  return specs;
}

export function main(argv: string[]): number {
  if (argv.length !== 1) {
    process.stderr.write("usage: figgen <spec-file>\n");
    return 2;
  }
  let specs: PlotSpec[];
  try {
    specs = specsFromFile(argv[0]);
  } catch (err) {
    process.stderr.write(`figgen: ${(err as Error).message}\n`);
    return 1;
  }
  let failed = false;
  for (const spec of specs) {
    try {
      const result = render(spec);
      if (result.warning) {
        process.stderr.write(`figgen: warning: ${result.warning}\n`);
      }
      process.stdout.write(
        `wrote ${result.output} (${result.curves} curves)\n`,
      );
    } catch (err) {
      process.stderr.write(
        `figgen: ${spec.kind} from ${spec.input}: ${(err as Error).message}\n`,
      );
      failed = true;
    }
  }
  return failed ? 1 : 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
