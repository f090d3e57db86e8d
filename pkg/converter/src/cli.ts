#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { convert, SourceFormat } from "./convert";

function main(): void {
  yargs(hideBin(process.argv))
    .command(
      "convert",
      "convert a source archive into a SIGSET dataset",
      (y) =>
        y
          .option("format", {
            choices: ["radioml2016", "radioml2018", "psd_csv"] as const,
            demandOption: true,
            describe: "source archive format",
          })
          .option("in", {
            type: "string",
            demandOption: true,
            describe: "input archive path",
          })
          .option("out", {
            type: "string",
            demandOption: true,
            describe: "output .sigset path",
          })
          .option("classes", {
            type: "string",
            describe:
              "comma list: ordered one-hot names for radioml2018, subset filter otherwise",
          })
          .option("snr-min", {
            type: "number",
            describe: "drop records below this SNR (dB)",
          }),
      (argv) => {
        try {
          const summary = convert(
            {
              format: argv.format as SourceFormat,
              path: argv.in,
              classes: argv.classes ? argv.classes.split(",").map((s) => s.trim()) : undefined,
              snrMin: argv.snrMin,
            },
            argv.out
          );
          console.log(
            `wrote ${summary.outPath}: ${summary.records} records, ` +
              `n=${summary.n}, m=${summary.m}, ${summary.classes.length} classes ` +
              `(${summary.classes.join(",")}), snr ${summary.snrRange[0]}..${summary.snrRange[1]} dB`
          );
        } catch (err) {
          console.error(`sigset-convert: ${(err as Error).message}`);
          process.exit(1);
        }
      }
    )
    .demandCommand(1)
    .strict()
    .help()
    .parse();
}

main();
