"""
测试脚本公用的运行器
各 test_*.py 的 main() 通过 run_checks 逐项执行并打印总结
"""
import sys
import time
import traceback
from typing import Callable, List, Tuple


def run_checks(title: str, checks: List[Tuple[str, Callable[[], None]]]) -> None:
    """
    依次执行测试函数，打印每项结果与总计，并以退出码结束

    Args:
        title: 测试脚本标题
        checks: (名称, 测试函数) 列表，测试函数失败时抛出 AssertionError
    """
    print("\n")
    print("╔" + "=" * 58 + "╗")
    print("║" + title.center(58) + "║")
    print("╚" + "=" * 58 + "╝")

    results = []
    for name, fn in checks:
        print("\n" + "=" * 50)
        print(name)
        print("=" * 50)
        start = time.time()
        try:
            fn()
            ok = True
            print(f"✓ 完成 ({time.time() - start:.1f}s)")
        except AssertionError as e:
            ok = False
            print(f"✗ 断言失败: {e}")
            traceback.print_exc()
        except Exception as e:
            ok = False
            print(f"✗ 运行出错: {type(e).__name__}: {e}")
            traceback.print_exc()
        results.append((name, ok))

    # 总结
    print("\n" + "=" * 50)
    print("测试总结")
    print("=" * 50)

    passed = sum(1 for _, ok in results if ok)
    total = len(results)
    for name, ok in results:
        status = "✓ 通过" if ok else "✗ 失败"
        print(f"{name}: {status}")

    print()
    print(f"总计: {passed}/{total} 项测试通过")

    if passed == total:
        print("\n🎉 所有测试通过!")
        sys.exit(0)
    else:
        print("\n⚠ 部分测试失败")
        sys.exit(1)
