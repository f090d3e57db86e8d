import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { datasetValues, readHdf5 } from "../src/hdf5";

const FIX = path.join(__dirname, "fixtures");
const expected = JSON.parse(
  fs.readFileSync(path.join(FIX, "expected.json"), "utf-8")
);

describe("mini2018.h5", () => {
  const file = readHdf5(fs.readFileSync(path.join(FIX, "mini2018.h5")));

  it("lists the three datasets", () => {
    expect([...file.keys()].sort()).toEqual(["X", "Y", "Z"]);
  });

  it("reads shapes and dtypes", () => {
    expect(file.get("X")!.shape).toEqual([12, 8, 2]);
    expect(file.get("X")!.dtype).toBe("<f4");
    expect(file.get("Y")!.shape).toEqual([12, 3]);
    expect(file.get("Y")!.dtype).toBe("<i8");
    expect(file.get("Z")!.shape).toEqual([12, 1]);
  });

  it("decodes X with exact float32 values", () => {
    const got = Array.from(datasetValues(file.get("X")!));
    const want = (expected.radioml2018.X as number[][][]).flat(2).map(Math.fround);
    expect(got).toEqual(want);
  });

  it("decodes the integer label and snr matrices", () => {
    expect(Array.from(datasetValues(file.get("Y")!))).toEqual(
      (expected.radioml2018.Y as number[][]).flat()
    );
    expect(Array.from(datasetValues(file.get("Z")!))).toEqual(
      (expected.radioml2018.Z as number[][]).flat()
    );
  });

  it("rejects non-HDF5 bytes", () => {
    expect(() => readHdf5(Buffer.alloc(128))).toThrow(/bad signature/);
  });
});
