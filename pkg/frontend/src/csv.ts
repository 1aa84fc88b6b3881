// Reader for the simulator's trajectory CSV dialect: comma separated, LF
// line endings, '.' decimals, '#'-prefixed metadata lines before a single
// header row.  These scripts never recompute dynamics; they only read.

import { readFileSync } from 'fs'

export class SchemaError extends Error {}
export class EmptyInputError extends Error {}

export interface Table {
  columns: string[]
  rows: string[][]
  meta: string[]
}

export function readTable(path: string): Table {
  const text = readFileSync(path, 'utf8')
  const lines = text.split('\n').filter((ln) => ln.length > 0)
  const meta = lines.filter((ln) => ln.startsWith('#'))
  const body = lines.filter((ln) => !ln.startsWith('#'))
  if (body.length === 0) {
    throw new EmptyInputError(`empty input: ${path}`)
  }
  const columns = body[0].split(',')
  const rows = body.slice(1).map((ln) => ln.split(','))
  if (rows.length === 0) {
    throw new EmptyInputError(`no data rows in ${path}`)
  }
  return { columns, rows, meta }
}

export function requireColumns(table: Table, names: string[], path: string): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`missing column '${name}' in ${path}`)
    }
  }
}

export interface Series {
  label: string
  t: number[]
  beta: number[]
}

/** Trajectory series grouped by path_id, in first-seen order; rows with a
 * non-finite bubble value (the pre-birth segment) are dropped. */
export function trajectorySeries(path: string, nShow: number): Series[] {
  const table = readTable(path)
  requireColumns(table, ['t', 'beta', 'path_id'], path)
  const it = table.columns.indexOf('t')
  const ib = table.columns.indexOf('beta')
  const ip = table.columns.indexOf('path_id')
  const order: string[] = []
  const byId = new Map<string, Series>()
  for (const row of table.rows) {
    const id = row[ip]
    if (!byId.has(id)) {
      if (order.length >= nShow) continue
      order.push(id)
      byId.set(id, { label: `path ${id}`, t: [], beta: [] })
    }
    const beta = Number(row[ib])
    if (!Number.isFinite(beta)) continue
    const s = byId.get(id)!
    s.t.push(Number(row[it]))
    s.beta.push(beta)
  }
  return order.map((id) => byId.get(id)!)
}

/** Single-path deterministic curve; the file must contain exactly one path. */
export function deterministicSeries(path: string): Series {
  const table = readTable(path)
  requireColumns(table, ['t', 'beta', 'path_id'], path)
  const ip = table.columns.indexOf('path_id')
  const ids = new Set(table.rows.map((r) => r[ip]))
  if (ids.size !== 1) {
    throw new SchemaError(
      `expected a single-path file, found ${ids.size} paths in ${path}`)
  }
  const label = (path.split('/').pop() ?? path)
    .replace(/^deterministic_/, '')
    .replace(/\.csv$/, '')
  const s = trajectorySeries(path, 1)[0]
  return { ...s, label }
}
