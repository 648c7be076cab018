/* tslint:disable */
/* eslint-disable */

/**
 * Basis function `index` of order `p` on the grid.
 */
export function basis_grid(spec: string, p: number, index: number, bounds: Float64Array, nx: number, ny: number): Float64Array;

/**
 * Multi-indices of the order-`p` basis as a JSON array of strings.
 */
export function basis_labels(spec: string, p: number): string;

/**
 * Mixture density on an `nx × ny` grid, row-major with `y` rows.
 */
export function density_grid(spec: string, bounds: Float64Array, nx: number, ny: number): Float64Array;

/**
 * Adaptive fit of the demo response; returns a JSON report.
 */
export function fit_demo(spec: string, p: number, strategy: string, budget: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly basis_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly basis_labels: (a: number, b: number, c: number) => [number, number, number, number];
    readonly density_grid: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly fit_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
