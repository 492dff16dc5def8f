/* tslint:disable */
/* eslint-disable */

/**
 * JavaScript handle to a [`Session`]; every method returns JSON.
 */
export class WebSession {
    free(): void;
    [Symbol.dispose](): void;
    drive(cycles: number, expert: boolean): string;
    static featureCount(): number;
    constructor(seed: number);
    reweight(index: number, value: number): string;
    sample(): string;
    scene(): string;
    status(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_websession_free: (a: number, b: number) => void;
    readonly websession_drive: (a: number, b: number, c: number) => [number, number, number, number];
    readonly websession_featureCount: () => number;
    readonly websession_new: (a: number) => [number, number, number];
    readonly websession_reweight: (a: number, b: number, c: number) => [number, number, number, number];
    readonly websession_sample: (a: number) => [number, number, number, number];
    readonly websession_scene: (a: number) => [number, number, number, number];
    readonly websession_status: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
