//! C99 kernel emission with HLS pragmas.

use std::fmt::Write;

use super::nest::{Addr, Dest, ElemOp, Endpoint, LoopNest, LoweredKernel, Nest, NestBody, Operand};
use crate::tensor_ir::ScalarFormat;

const PRELUDE_STREAM: &str = r#"typedef struct {
    data_t *data;
    size_t cap, head, count;
} stream_t;

static void stream_write(stream_t *s, data_t v)
{
    s->data[(s->head + s->count) % s->cap] = v;
    s->count++;
}

static data_t stream_read(stream_t *s)
{
    data_t v = s->data[s->head];
    s->head = (s->head + 1) % s->cap;
    s->count--;
    return v;
}
"#;

fn prelude(fmt: ScalarFormat, out: &mut String) {
    out.push_str("#ifdef KERNEL_HLS_HEADER\n#include KERNEL_HLS_HEADER\n");
    match fmt {
        ScalarFormat::Fixed { width_bits, int_bits, .. } => {
            let _ = writeln!(out, "typedef ap_fixed<{width_bits}, {int_bits}, AP_RND_CONV> data_t;");
        }
        ScalarFormat::Float32 => out.push_str("typedef float data_t;\n"),
        ScalarFormat::CustomFloat { exp_bits, mantissa_bits } => {
            let _ = writeln!(out, "typedef custom_float<{exp_bits}, {mantissa_bits}> data_t;");
        }
        ScalarFormat::Float64 => out.push_str("typedef double data_t;\n"),
    }
    out.push_str(
        "typedef hls::stream<data_t> stream_t;\n#define stream_read(s) ((s)->read())\n#define stream_write(s, v) ((s)->write(v))\n",
    );
    out.push_str("#define KZERO ((data_t)0)\n#define KMUL(a, b) ((a) * (b))\n#define KADD(a, b) ((a) + (b))\n");
    out.push_str("#else\n#include <stddef.h>\n#include <stdint.h>\n\n");
    match fmt {
        ScalarFormat::Fixed { width_bits, frac_bits, .. } => {
            let _ = writeln!(out, "/* fixed({width_bits}) words with {frac_bits} fraction bits */");
            let wide = if width_bits == 64 { "__int128" } else { "int64_t" };
            out.push_str("typedef int64_t data_t;\n");
            let _ = writeln!(out, "#define KFRAC {frac_bits}");
            out.push_str("#define KZERO ((data_t)0)\n#define KADD(a, b) ((a) + (b))\n");
            let _ = write!(
                out,
                "static data_t kmul(data_t a, data_t b)\n{{\n    {wide} p = ({wide})a * b;\n    {wide} q = p >> KFRAC;\n    {wide} r = p - (q << KFRAC);\n    {wide} h = ({wide})1 << (KFRAC - 1);\n    if (r > h || (r == h && (q & 1)))\n        q += 1;\n    return (data_t)q;\n}}\n#define KMUL(a, b) kmul((a), (b))\n"
            );
        }
        ScalarFormat::Float32 => {
            out.push_str("typedef float data_t;\n#define KZERO 0.0f\n#define KMUL(a, b) ((a) * (b))\n#define KADD(a, b) ((a) + (b))\n")
        }
        _ => out.push_str("typedef double data_t;\n#define KZERO 0.0\n#define KMUL(a, b) ((a) * (b))\n#define KADD(a, b) ((a) + (b))\n"),
    }
    out.push('\n');
    out.push_str(PRELUDE_STREAM);
    out.push_str("#endif\n");
}

fn addr_expr(nest: &Nest, addr: &Addr) -> String {
    let terms: Vec<String> = addr
        .strides
        .iter()
        .zip(&nest.loops)
        .filter(|(s, _)| **s != 0)
        .map(|(s, l)| if *s == 1 { l.index.clone() } else { format!("{} * {s}", l.index) })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

struct Emitter<'a> {
    kernel: &'a LoweredKernel,
    group: &'a LoopNest,
    out: String,
}

impl Emitter<'_> {
    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn operand(&self, nest: &Nest, o: &Operand) -> String {
        match o {
            Operand::Buffer { buffer, addr } => format!("{}[{}]", self.group.buffers[*buffer].name, addr_expr(nest, addr)),
            Operand::Stream(s) => format!("v_{}", self.kernel.streams[*s].name),
        }
    }

    fn dests(&mut self, depth: usize, nest: &Nest, dests: &[Dest], value: &str) {
        for d in dests {
            let s = match d {
                Dest::Buffer { buffer, addr } => format!("{}[{}] = {value};", self.group.buffers[*buffer].name, addr_expr(nest, addr)),
                Dest::Stream(s) => format!("stream_write({}, {value});", self.kernel.streams[*s].name),
            };
            self.line(depth, &s);
        }
    }

    fn open_loops(&mut self, nest: &Nest, range: std::ops::Range<usize>, depth: &mut usize) {
        for l in &nest.loops[range] {
            let s = format!("for (int {i} = 0; {i} < {e}; {i}++) {{", i = l.index, e = l.extent);
            self.line(*depth, &s);
            *depth += 1;
        }
    }

    fn close_loops(&mut self, n: usize, depth: &mut usize) {
        for _ in 0..n {
            *depth -= 1;
            self.line(*depth, "}");
        }
    }

    fn pops(&mut self, depth: usize, operands: &[&Operand]) {
        let mut seen = Vec::new();
        for o in operands {
            if let Operand::Stream(s) = o {
                if !seen.contains(s) {
                    seen.push(*s);
                    let name = &self.kernel.streams[*s].name;
                    self.line(depth, &format!("data_t v_{name} = stream_read({name});"));
                }
            }
        }
    }

    fn nest(&mut self, nest: &Nest) {
        let all = nest.loops.len();
        let outer = all - nest.reduce;
        let mut depth = 1;
        match &nest.body {
            NestBody::Fill { stream, buffer } => {
                self.open_loops(nest, 0..all, &mut depth);
                self.line(depth, "#pragma HLS PIPELINE II=1");
                let shape: Vec<usize> = nest.extents();
                let addr = Addr { strides: crate::tensor_ir::tensor::strides(&shape) };
                let s = format!(
                    "{}[{}] = stream_read({});",
                    self.group.buffers[*buffer].name,
                    addr_expr(nest, &addr),
                    self.kernel.streams[*stream].name
                );
                self.line(depth, &s);
                self.close_loops(all, &mut depth);
            }
            NestBody::Contract { operands, dests } => {
                self.open_loops(nest, 0..outer, &mut depth);
                self.line(depth, "#pragma HLS PIPELINE II=1");
                self.line(depth, "data_t acc = KZERO;");
                self.open_loops(nest, outer..all, &mut depth);
                if nest.unroll > 1 {
                    self.line(depth, &format!("#pragma HLS UNROLL factor={}", nest.unroll));
                }
                let mut term = self.operand(nest, &operands[0]);
                for o in &operands[1..] {
                    term = format!("KMUL({term}, {})", self.operand(nest, o));
                }
                self.line(depth, &format!("acc = KADD(acc, {term});"));
                self.close_loops(nest.reduce, &mut depth);
                self.dests(depth, nest, dests, "acc");
                self.close_loops(outer, &mut depth);
            }
            NestBody::Elementwise { op, operands, dests } => {
                self.open_loops(nest, 0..all, &mut depth);
                self.line(depth, "#pragma HLS PIPELINE II=1");
                self.pops(depth, &[&operands[0], &operands[1]]);
                let f = match op {
                    ElemOp::Mul => "KMUL",
                    ElemOp::Add => "KADD",
                };
                let v = format!("{f}({}, {})", self.operand(nest, &operands[0]), self.operand(nest, &operands[1]));
                self.line(depth, &format!("data_t val = {v};"));
                self.dests(depth, nest, dests, "val");
                self.close_loops(all, &mut depth);
            }
            NestBody::Copy { src, dests } => {
                self.open_loops(nest, 0..all, &mut depth);
                self.line(depth, "#pragma HLS PIPELINE II=1");
                self.pops(depth, &[src]);
                let v = self.operand(nest, src);
                self.line(depth, &format!("data_t val = {v};"));
                self.dests(depth, nest, dests, "val");
                self.close_loops(all, &mut depth);
            }
        }
    }
}

fn group_params(kernel: &LoweredKernel, g: usize) -> Vec<usize> {
    kernel.streams.iter().filter(|s| s.src == Endpoint::Group(g) || s.dst == Endpoint::Group(g)).map(|s| s.id).collect()
}

/// C99 source: one function per group plus a top-level dataflow function.
/// Streams default to full-tensor depth.
pub fn emit_c(kernel: &LoweredKernel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "/* {}: {} group(s), {} format */\n", kernel.name, kernel.groups.len(), kernel.format);
    prelude(kernel.format, &mut out);
    for &gid in &kernel.schedule.stage_order {
        let group = &kernel.groups[gid];
        let params: Vec<String> = group_params(kernel, gid).iter().map(|&s| format!("stream_t *{}", kernel.streams[s].name)).collect();
        let _ = write!(out, "\nstatic void {}_{}({})\n{{\n", kernel.name, group.name, params.join(", "));
        let mut e = Emitter { kernel, group, out: String::new() };
        for b in &group.buffers {
            let s = format!("data_t {}[{}];", b.name, b.elements);
            e.line(1, &s);
        }
        for nest in &group.nests {
            e.nest(nest);
        }
        out.push_str(&e.out);
        out.push_str("}\n");
    }

    let graph = &kernel.schedule.graph;
    let mut args: Vec<String> =
        graph.inputs().map(|n| format!("const data_t *{}", super::nest::tensor_name(&kernel.schedule, n.id))).collect();
    args.extend(kernel.streams.iter().filter_map(|s| s.output.as_ref()).map(|o| format!("data_t *{o}")));
    let _ = write!(out, "\nvoid {}_top({})\n{{\n", kernel.name, args.join(", "));
    out.push_str("#pragma HLS DATAFLOW\n");
    for s in &kernel.streams {
        let _ = writeln!(out, "    static data_t {n}_mem[{e}];", n = s.name, e = s.elements);
        let _ = writeln!(out, "    stream_t {n} = {{ {n}_mem, {e}, 0, 0 }};", n = s.name, e = s.elements);
        let _ = writeln!(out, "#pragma HLS STREAM variable={} depth={}", s.name, s.elements);
    }
    for s in kernel.streams.iter().filter(|s| s.src == Endpoint::Read) {
        let src = super::nest::tensor_name(&kernel.schedule, s.tensor);
        let _ = writeln!(out, "    for (int i = 0; i < {}; i++)\n        stream_write(&{}, {src}[i]);", s.elements, s.name);
    }
    for &gid in &kernel.schedule.stage_order {
        let params: Vec<String> = group_params(kernel, gid).iter().map(|&s| format!("&{}", kernel.streams[s].name)).collect();
        let _ = writeln!(out, "    {}_{}({});", kernel.name, kernel.groups[gid].name, params.join(", "));
    }
    for s in kernel.streams.iter().filter(|s| s.dst == Endpoint::Write) {
        let o = s.output.as_ref().expect("write stream names an output");
        let _ = writeln!(out, "    for (int i = 0; i < {}; i++)\n        {o}[i] = stream_read(&{});", s.elements, s.name);
    }
    out.push_str("}\n");
    out
}
